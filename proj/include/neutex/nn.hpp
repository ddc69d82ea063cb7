// SPDX-License-Identifier: Apache-2.0
//
// MLP layers, parameter registry, and the Adam optimizer.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "neutex/tensor.hpp"

namespace neutex {

enum class Activation { None, Relu, Softplus, Sigmoid, Tanh };

Activation activation_from_string(const std::string& name);
std::string activation_to_string(Activation act);
Tensor apply_activation(const Tensor& x, Activation act);

struct DenseLayer {
    Tensor weights;  // (in, out)
    Tensor bias;     // (1, out)
    Activation act = Activation::None;
};

class Rng;

// Plain affine-then-activation stack. An optional skip connection
// re-concatenates the network input before layer `skip_layer`.
struct Mlp {
    std::vector<DenseLayer> layers;
    int skip_layer = -1;

    // x: (N, in) -> (N, out); throws on a dimension chain break naming the
    // offending layer index.
    Tensor forward(const Tensor& x) const;

    long input_dim() const;
    long output_dim() const;
};

// Kaiming-style uniform fan-in init. `final_scale` shrinks the last layer
// (used to start the inverse mapping near the origin).
Mlp make_mlp(long input_dim, const std::vector<long>& hidden, long output_dim,
             Activation hidden_act, Activation output_act, Rng& rng,
             int skip_layer = -1, double final_scale = 1.0);

// Ordered name -> parameter map. Order is the registration order and fixes
// the checkpoint blob layout and gradient-reduction order.
class ParameterMap {
  public:
    void add(const std::string& name, Tensor param);
    void add_mlp(const std::string& prefix, Mlp& mlp);

    size_t size() const { return items_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const;

    void zero_grads();
    long total_values() const;

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, size_t> index_;
};

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moments are kept per parameter name so a subset
// of parameters can be stepped (frozen networks keep their state untouched).
class Adam {
  public:
    explicit Adam(AdamConfig config) : config_(config) {}

    // Requires a populated gradient on every listed parameter; clears the
    // gradients afterwards.
    void step(const std::vector<std::pair<std::string, Tensor>>& params);

    int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }

    // checkpoint support
    struct Slot {
        std::vector<double> m, v;
    };
    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }
    void set_step_count(int64_t s) { step_ = s; }

  private:
    AdamConfig config_;
    int64_t step_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace neutex
