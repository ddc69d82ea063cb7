// SPDX-License-Identifier: Apache-2.0

#include "neutex/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "neutex/rng.hpp"

namespace neutex {

Activation activation_from_string(const std::string& name) {
    if (name == "none") return Activation::None;
    if (name == "relu") return Activation::Relu;
    if (name == "softplus") return Activation::Softplus;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw std::runtime_error("unknown activation '" + name + "'");
}

std::string activation_to_string(Activation act) {
    switch (act) {
        case Activation::None: return "none";
        case Activation::Relu: return "relu";
        case Activation::Softplus: return "softplus";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "none";
}

Tensor apply_activation(const Tensor& x, Activation act) {
    switch (act) {
        case Activation::None: return x;
        case Activation::Relu: return relu(x);
        case Activation::Softplus: return softplus(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Tanh: return tanh(x);
    }
    return x;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (skip_layer >= 0 && static_cast<size_t>(skip_layer) == i && i > 0) {
            h = concat({h, x}, -1);
        }
        const DenseLayer& layer = layers[i];
        if (h.dim(1) != layer.weights.dim(0)) {
            throw std::runtime_error(
                "mlp_forward: dimension chain break at layer " + std::to_string(i) +
                ": input " + shape_str(h.shape()) + " vs weights " +
                shape_str(layer.weights.shape()));
        }
        h = add(matmul(h, layer.weights), layer.bias);
        h = apply_activation(h, layer.act);
    }
    return h;
}

long Mlp::input_dim() const { return layers.front().weights.dim(0); }
long Mlp::output_dim() const { return layers.back().weights.dim(1); }

namespace {

DenseLayer make_layer(long in, long out, Activation act, Rng& rng, double scale) {
    std::vector<double> w(static_cast<size_t>(in * out));
    const double bound = scale * std::sqrt(6.0 / static_cast<double>(in));
    for (double& v : w) v = rng.uniform(-bound, bound);
    DenseLayer layer;
    layer.weights = Tensor::from_vector({in, out}, std::move(w), true);
    layer.bias = Tensor::zeros({1, out}, true);
    layer.act = act;
    return layer;
}

}  // namespace

Mlp make_mlp(long input_dim, const std::vector<long>& hidden, long output_dim,
             Activation hidden_act, Activation output_act, Rng& rng,
             int skip_layer, double final_scale) {
    Mlp mlp;
    mlp.skip_layer = skip_layer;
    long prev = input_dim;
    for (size_t i = 0; i < hidden.size(); ++i) {
        long in = prev;
        if (skip_layer >= 0 && static_cast<size_t>(skip_layer) == i && i > 0) {
            in += input_dim;
        }
        mlp.layers.push_back(make_layer(in, hidden[i], hidden_act, rng, 1.0));
        prev = hidden[i];
    }
    long in = prev;
    if (skip_layer >= 0 && static_cast<size_t>(skip_layer) == hidden.size()) {
        in += input_dim;
    }
    mlp.layers.push_back(make_layer(in, output_dim, output_act, rng, final_scale));
    return mlp;
}

void ParameterMap::add(const std::string& name, Tensor param) {
    if (index_.count(name)) throw std::runtime_error("duplicate parameter '" + name + "'");
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(param));
}

void ParameterMap::add_mlp(const std::string& prefix, Mlp& mlp) {
    for (size_t i = 0; i < mlp.layers.size(); ++i) {
        add(prefix + ".layer" + std::to_string(i) + ".weights", mlp.layers[i].weights);
        add(prefix + ".layer" + std::to_string(i) + ".bias", mlp.layers[i].bias);
    }
}

Tensor& ParameterMap::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter '" + name + "'");
    return items_[it->second].second;
}

bool ParameterMap::contains(const std::string& name) const { return index_.count(name) > 0; }

void ParameterMap::zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
}

long ParameterMap::total_values() const {
    long n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

void Adam::step(const std::vector<std::pair<std::string, Tensor>>& params) {
    for (const auto& [name, t] : params) {
        if (!t.has_grad()) {
            throw std::runtime_error("adam_step: parameter '" + name + "' has no gradient");
        }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(config_.beta1, t);
    const double bc2 = 1.0 - std::pow(config_.beta2, t);
    for (const auto& [name, param] : params) {
        Tensor p = param;
        Slot& slot = slots_[name];
        if (slot.m.empty()) {
            slot.m.assign(static_cast<size_t>(p.numel()), 0.0);
            slot.v.assign(static_cast<size_t>(p.numel()), 0.0);
        }
        auto vals = p.data();
        auto grad = p.grad();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double g = grad[i];
            slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g;
            slot.v[i] = config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            vals[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        p.clear_grad();
    }
}

}  // namespace neutex
