// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle for reverse-mode gradients.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "neutex/rng.hpp"
#include "neutex/tensor.hpp"

namespace neutex::testing {

// Builds a scalar from the inputs; called repeatedly with perturbed values.
using GraphFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline double eval_scalar(const GraphFn& graph, const std::vector<Tensor>& inputs) {
    return graph(inputs).value();
}

// Compares tape gradients of `graph` against central differences (h=1e-5).
// Returns the max relative error (relative to max(|analytic|, |numeric|, 1)).
inline double max_grad_error(const GraphFn& graph, std::vector<Tensor> inputs,
                             double h = 1e-5) {
    Tape tape;
    std::vector<std::vector<double>> analytic;
    // gradients accumulate across backward passes; start from a clean slate
    for (Tensor& in : inputs) in.clear_grad();
    {
        TapeScope scope(tape);
        Tensor loss = graph(inputs);
        tape.backward(loss);
    }
    for (Tensor& in : inputs) {
        // inputs untouched by the graph get an all-zero analytic gradient
        auto g = in.grad();
        analytic.emplace_back(g.begin(), g.end());
    }
    double worst = 0.0;
    for (size_t p = 0; p < inputs.size(); ++p) {
        auto values = inputs[p].data();
        for (size_t i = 0; i < values.size(); ++i) {
            const double keep = values[i];
            values[i] = keep + h;
            const double up = eval_scalar(graph, inputs);
            values[i] = keep - h;
            const double down = eval_scalar(graph, inputs);
            values[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(analytic[p][i]), 1.0});
            worst = std::max(worst, std::abs(numeric - analytic[p][i]) / denom);
        }
    }
    return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
    const long n = shape_numel(shape);
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

}  // namespace neutex::testing
