// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>

#include "grad_check.hpp"
#include "neutex/nn.hpp"
#include "neutex/rng.hpp"

using namespace neutex;
using neutex::testing::random_tensor;

TEST_CASE("mlp forward shapes and skip connection") {
    Rng rng(3);
    Mlp mlp = make_mlp(5, {16, 16, 16}, 2, Activation::Relu, Activation::None, rng,
                       /*skip_layer=*/2);
    Tensor x = random_tensor({7, 5}, rng, -1, 1, false);
    Tensor y = mlp.forward(x);
    CHECK(y.shape() == Shape{7, 2});
    CHECK(mlp.input_dim() == 5);
    CHECK(mlp.output_dim() == 2);
    // layer at skip index consumes width + input features
    CHECK(mlp.layers[2].weights.dim(0) == 16 + 5);
}

TEST_CASE("mlp reports dimension chain breaks") {
    Rng rng(4);
    Mlp mlp = make_mlp(3, {8}, 2, Activation::Relu, Activation::None, rng);
    Tensor bad = random_tensor({5, 4}, rng, -1, 1, false);
    CHECK_THROWS_WITH_AS(mlp.forward(bad), doctest::Contains("layer"), std::runtime_error);
}

TEST_CASE("kaiming init stays inside the fan-in bound and final_scale shrinks") {
    Rng rng(5);
    Mlp mlp = make_mlp(10, {32}, 3, Activation::Relu, Activation::Tanh, rng, -1,
                       /*final_scale=*/1e-2);
    const double bound0 = std::sqrt(6.0 / 10.0);
    for (double w : mlp.layers[0].weights.data()) CHECK(std::abs(w) <= bound0);
    const double bound1 = 1e-2 * std::sqrt(6.0 / 32.0);
    for (double w : mlp.layers[1].weights.data()) CHECK(std::abs(w) <= bound1 + 1e-12);
}

TEST_CASE("mlp gradients match finite differences") {
    Rng rng(6);
    Mlp mlp = make_mlp(4, {8, 8}, 2, Activation::Softplus, Activation::Sigmoid, rng);
    Tensor x = random_tensor({5, 4}, rng, -1, 1, false);
    std::vector<Tensor> params;
    for (auto& layer : mlp.layers) {
        params.push_back(layer.weights);
        params.push_back(layer.bias);
    }
    const double err = neutex::testing::max_grad_error(
        [&](const std::vector<Tensor>&) { return sum(square(mlp.forward(x))); }, params);
    CHECK(err < 1e-6);
}

TEST_CASE("parameter map preserves order and rejects duplicates") {
    ParameterMap map;
    map.add("b", Tensor::zeros({2}, true));
    map.add("a", Tensor::zeros({3}, true));
    CHECK(map.items()[0].first == "b");
    CHECK(map.items()[1].first == "a");
    CHECK(map.total_values() == 5);
    CHECK_THROWS_AS(map.add("a", Tensor::zeros({1}, true)), std::runtime_error);
}

TEST_CASE("adam matches a hand-computed first step") {
    AdamConfig config;
    config.lr = 0.1;
    Adam adam(config);
    Tensor p = Tensor::from_vector({2}, {1.0, -2.0}, true);
    p.grad()[0] = 0.5;
    p.grad()[1] = -1.0;
    adam.step({{"p", p}});
    // t=1: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps) = lr * sign(g)
    CHECK(p.data()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(p.data()[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
    CHECK_FALSE(p.has_grad());  // cleared after the step
}

TEST_CASE("adam requires populated gradients") {
    Adam adam(AdamConfig{});
    Tensor p = Tensor::zeros({2}, true);
    CHECK_THROWS_WITH_AS(adam.step({{"p", p}}), doctest::Contains("p"), std::runtime_error);
}

TEST_CASE("adam converges on a quadratic") {
    Adam adam(AdamConfig{.lr = 0.05, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    Tensor p = Tensor::from_vector({1}, {3.0}, true);
    for (int i = 0; i < 400; ++i) {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = sum(square(p));
        tape.backward(loss);
        adam.step({{"p", p}});
    }
    CHECK(std::abs(p.data()[0]) < 1e-2);
}

TEST_CASE("activation names round trip") {
    for (auto act : {Activation::None, Activation::Relu, Activation::Softplus,
                     Activation::Sigmoid, Activation::Tanh}) {
        CHECK(activation_from_string(activation_to_string(act)) == act);
    }
    CHECK_THROWS_AS(activation_from_string("gelu"), std::runtime_error);
}
