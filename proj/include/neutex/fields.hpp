// SPDX-License-Identifier: Apache-2.0
//
// The four scene networks: density, texture mapping, inverse mapping, and
// texture, plus the positional encodings feeding them. Density and texture
// see encoded inputs; the two mapping networks consume raw coordinates so
// they stay smooth.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neutex/nn.hpp"
#include "neutex/tensor.hpp"

namespace neutex {

struct PositionalEncodingConfig {
    int k_position = 10;  // frequencies for 3D points x
    int k_uv = 10;        // frequencies for UV inputs to the texture net
    int k_view = 6;       // frequencies for the view direction
};

struct MlpSpec {
    int depth = 4;   // hidden layer count
    int width = 256;
    int skip = -1;   // hidden layer index where the input is re-concatenated
};

struct FieldConfig {
    PositionalEncodingConfig enc;
    MlpSpec density{8, 256, 4};
    MlpSpec uv{4, 256, -1};
    MlpSpec uv_inv{4, 256, -1};
    MlpSpec texture{6, 256, -1};
    std::string uv_topology = "sphere";  // "sphere" (default) or "square"
    uint64_t init_seed = 1;
};

nlohmann::json field_config_to_json(const FieldConfig& config);
FieldConfig field_config_from_json(const nlohmann::json& j);

// gamma(t) = [sin(2^1 pi t), cos(2^1 pi t), ..., sin(2^k pi t), cos(2^k pi t)]
std::vector<double> positional_encode(double value, int k);

// Batched encoding of (N, C): raw columns followed by sin/cos blocks per
// frequency; column order is [x, sin(2pi x), cos(2pi x), ..., per component].
Tensor encode_points(const Tensor& x, int k);

struct UVPoint {
    std::array<double, 3> u;  // unit vector on S^2
};

class FieldSet {
  public:
    FieldSet(const FieldConfig& config);

    // Batched, tape-aware evaluators. All take (N,3) row-major inputs.
    Tensor eval_density(const Tensor& x) const;       // (N,1), softplus >= 0
    Tensor eval_uv(const Tensor& x) const;            // (N,3), unit norm
    Tensor eval_uv_inv(const Tensor& u) const;        // (N,3), tanh in (-1,1)
    Tensor eval_texture(const Tensor& u, const Tensor& d) const;  // (N,3) in [0,1]

    // Single-point convenience (no gradients).
    double density_at(const std::array<double, 3>& x) const;
    UVPoint uv_at(const std::array<double, 3>& x) const;
    std::array<double, 3> uv_inv_at(const UVPoint& u) const;
    std::array<double, 3> texture_at(const UVPoint& u,
                                     const std::array<double, 3>& d) const;
    // (sigma, rgb) per Eq-style composition: density and texture paths stay
    // independent.
    std::pair<double, std::array<double, 3>> radiance_at(
        const std::array<double, 3>& x, const std::array<double, 3>& d) const;

    const FieldConfig& config() const { return config_; }
    ParameterMap& params() { return params_; }
    const ParameterMap& params() const { return params_; }

    Mlp& density_net() { return density_; }
    Mlp& uv_net() { return uv_; }
    Mlp& uv_inv_net() { return uv_inv_; }
    Mlp& texture_net() { return texture_; }

    // Deep copy with fresh gradient-bearing parameter leaves (used by
    // per-chunk training workers).
    FieldSet clone() const;
    // Copies parameter values from another field set (same architecture).
    void copy_values_from(const FieldSet& other);

    static bool is_texture_param(const std::string& name);

  private:
    void register_params();

    FieldConfig config_;
    Mlp density_, uv_, uv_inv_, texture_;
    ParameterMap params_;
};

void check_unit_direction(const Tensor& d);

}  // namespace neutex
