// SPDX-License-Identifier: Apache-2.0

#include "neutex/fields.hpp"

#include <cmath>
#include <stdexcept>

#include "neutex/rng.hpp"

namespace neutex {

namespace {

constexpr double kPi = 3.14159265358979323846;

nlohmann::json mlp_spec_to_json(const MlpSpec& spec) {
    return {{"depth", spec.depth}, {"width", spec.width}, {"skip", spec.skip}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.depth = j.at("depth").get<int>();
    spec.width = j.at("width").get<int>();
    spec.skip = j.at("skip").get<int>();
    return spec;
}

}  // namespace

nlohmann::json field_config_to_json(const FieldConfig& config) {
    return {{"k_position", config.enc.k_position},
            {"k_uv", config.enc.k_uv},
            {"k_view", config.enc.k_view},
            {"density", mlp_spec_to_json(config.density)},
            {"uv", mlp_spec_to_json(config.uv)},
            {"uv_inv", mlp_spec_to_json(config.uv_inv)},
            {"texture", mlp_spec_to_json(config.texture)},
            {"uv_topology", config.uv_topology},
            {"init_seed", config.init_seed}};
}

FieldConfig field_config_from_json(const nlohmann::json& j) {
    FieldConfig config;
    config.enc.k_position = j.at("k_position").get<int>();
    config.enc.k_uv = j.at("k_uv").get<int>();
    config.enc.k_view = j.at("k_view").get<int>();
    config.density = mlp_spec_from_json(j.at("density"));
    config.uv = mlp_spec_from_json(j.at("uv"));
    config.uv_inv = mlp_spec_from_json(j.at("uv_inv"));
    config.texture = mlp_spec_from_json(j.at("texture"));
    config.uv_topology = j.at("uv_topology").get<std::string>();
    config.init_seed = j.at("init_seed").get<uint64_t>();
    return config;
}

std::vector<double> positional_encode(double value, int k) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(2 * k));
    double freq = 2.0 * kPi;
    for (int i = 1; i <= k; ++i) {
        out.push_back(std::sin(freq * value));
        out.push_back(std::cos(freq * value));
        freq *= 2.0;
    }
    return out;
}

Tensor encode_points(const Tensor& x, int k) {
    if (k == 0) return x;
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(2 * k + 1));
    parts.push_back(x);
    double freq = 2.0 * kPi;
    for (int i = 1; i <= k; ++i) {
        Tensor scaled = scale(x, freq);
        parts.push_back(sin(scaled));
        parts.push_back(cos(scaled));
        freq *= 2.0;
    }
    return concat(parts, -1);
}

FieldSet::FieldSet(const FieldConfig& config) : config_(config) {
    Rng rng(splitmix64(config.init_seed ^ 0x6e657574ULL));
    const long pos_dim = 3 + 6 * config.enc.k_position;
    const long uv_in_dim = 3 + 6 * config.enc.k_uv;
    const long view_dim = 3 + 6 * config.enc.k_view;
    auto hidden = [](const MlpSpec& s) {
        return std::vector<long>(static_cast<size_t>(s.depth), s.width);
    };
    density_ = make_mlp(pos_dim, hidden(config.density), 1, Activation::Relu,
                        Activation::None, rng, config.density.skip);
    // mapping networks take raw coordinates; no encoding by construction.
    // softplus hidden units keep both maps smooth and keep the pre-normalized
    // uv output away from the exact zero a dead relu row could produce
    uv_ = make_mlp(3, hidden(config.uv), 3, Activation::Softplus, Activation::None,
                   rng, config.uv.skip);
    uv_inv_ = make_mlp(3, hidden(config.uv_inv), 3, Activation::Softplus,
                       Activation::Tanh, rng, config.uv_inv.skip, 1e-2);
    texture_ = make_mlp(uv_in_dim + view_dim, hidden(config.texture), 3,
                        Activation::Relu, Activation::Sigmoid, rng,
                        config.texture.skip);
    register_params();
}

void FieldSet::register_params() {
    params_ = ParameterMap();
    params_.add_mlp("density", density_);
    params_.add_mlp("uv", uv_);
    params_.add_mlp("uv_inv", uv_inv_);
    params_.add_mlp("texture", texture_);
}

bool FieldSet::is_texture_param(const std::string& name) {
    return name.rfind("texture.", 0) == 0;
}

Tensor FieldSet::eval_density(const Tensor& x) const {
    x.check_finite("eval_density input");
    return softplus(density_.forward(encode_points(x, config_.enc.k_position)));
}

Tensor FieldSet::eval_uv(const Tensor& x) const {
    x.check_finite("eval_uv input");
    Tensor raw = uv_.forward(x);
    if (config_.uv_topology == "square") {
        // planar topology: (u,v) in [-1,1]^2 embedded as (u,v,0)
        Tensor uv2 = tanh(slice(raw, -1, 0, 2));
        return concat({uv2, Tensor::zeros({x.dim(0), 1})}, -1);
    }
    Tensor norm = l2norm(raw, 1e-12);
    return div(raw, norm);
}

Tensor FieldSet::eval_uv_inv(const Tensor& u) const {
    u.check_finite("eval_inverse_uv input");
    return uv_inv_.forward(u);
}

void check_unit_direction(const Tensor& d) {
    const long n = d.dim(0);
    auto dv = d.data();
    for (long i = 0; i < n; ++i) {
        double norm = std::sqrt(dv[static_cast<size_t>(3 * i)] * dv[static_cast<size_t>(3 * i)] +
                                dv[static_cast<size_t>(3 * i + 1)] * dv[static_cast<size_t>(3 * i + 1)] +
                                dv[static_cast<size_t>(3 * i + 2)] * dv[static_cast<size_t>(3 * i + 2)]);
        if (std::abs(norm - 1.0) > 1e-6) {
            throw std::runtime_error("eval_texture: view direction row " +
                                     std::to_string(i) + " is not unit (norm " +
                                     std::to_string(norm) + ")");
        }
    }
}

Tensor FieldSet::eval_texture(const Tensor& u, const Tensor& d) const {
    check_unit_direction(d);
    Tensor enc_u = encode_points(u, config_.enc.k_uv);
    Tensor enc_d = encode_points(d, config_.enc.k_view);
    return texture_.forward(concat({enc_u, enc_d}, -1));
}

namespace {
Tensor row3(const std::array<double, 3>& v) {
    return Tensor::from_vector({1, 3}, {v[0], v[1], v[2]});
}
}  // namespace

double FieldSet::density_at(const std::array<double, 3>& x) const {
    for (double v : x) {
        if (!std::isfinite(v)) throw std::runtime_error("eval_density: non-finite input");
    }
    return eval_density(row3(x)).data()[0];
}

UVPoint FieldSet::uv_at(const std::array<double, 3>& x) const {
    Tensor u = eval_uv(row3(x));
    auto uv = u.data();
    return UVPoint{{uv[0], uv[1], uv[2]}};
}

std::array<double, 3> FieldSet::uv_inv_at(const UVPoint& u) const {
    Tensor x = eval_uv_inv(row3(u.u));
    auto xv = x.data();
    return {xv[0], xv[1], xv[2]};
}

std::array<double, 3> FieldSet::texture_at(const UVPoint& u,
                                           const std::array<double, 3>& d) const {
    Tensor c = eval_texture(row3(u.u), row3(d));
    auto cv = c.data();
    return {cv[0], cv[1], cv[2]};
}

std::pair<double, std::array<double, 3>> FieldSet::radiance_at(
    const std::array<double, 3>& x, const std::array<double, 3>& d) const {
    return {density_at(x), texture_at(uv_at(x), d)};
}

FieldSet FieldSet::clone() const {
    FieldSet copy(config_);
    copy.copy_values_from(*this);
    return copy;
}

void FieldSet::copy_values_from(const FieldSet& other) {
    const auto& src = other.params_.items();
    auto& dst = params_;
    if (src.size() != dst.items().size()) {
        throw std::runtime_error("copy_values_from: architecture mismatch");
    }
    for (const auto& [name, tensor] : src) {
        Tensor& mine = dst.at(name);
        if (mine.shape() != tensor.shape()) {
            throw std::runtime_error("copy_values_from: shape mismatch for " + name);
        }
        std::copy(tensor.data().begin(), tensor.data().end(), mine.data().begin());
    }
}

}  // namespace neutex
