// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>

#include "grad_check.hpp"
#include "neutex/fields.hpp"

using namespace neutex;
using neutex::testing::random_tensor;

namespace {
FieldConfig small_config() {
    FieldConfig config;
    config.enc = {3, 3, 2};
    config.density = {2, 16, -1};
    config.uv = {2, 16, -1};
    config.uv_inv = {2, 16, -1};
    config.texture = {2, 16, -1};
    config.init_seed = 9;
    return config;
}
}  // namespace

TEST_CASE("positional encoding matches the closed form") {
    const double t = 0.37;
    const auto enc = positional_encode(t, 3);
    REQUIRE(enc.size() == 6);
    const double pi = 3.14159265358979323846;
    CHECK(enc[0] == doctest::Approx(std::sin(2.0 * pi * t)).epsilon(1e-15));
    CHECK(enc[1] == doctest::Approx(std::cos(2.0 * pi * t)).epsilon(1e-15));
    CHECK(enc[2] == doctest::Approx(std::sin(4.0 * pi * t)).epsilon(1e-15));
    CHECK(enc[3] == doctest::Approx(std::cos(4.0 * pi * t)).epsilon(1e-15));
    CHECK(enc[4] == doctest::Approx(std::sin(8.0 * pi * t)).epsilon(1e-15));
    CHECK(enc[5] == doctest::Approx(std::cos(8.0 * pi * t)).epsilon(1e-15));
}

TEST_CASE("encode_points prepends the raw value") {
    Tensor x = Tensor::from_vector({1, 2}, {0.25, -0.5});
    Tensor enc = encode_points(x, 2);
    // columns: [x0, x1, sin/cos blocks]
    CHECK(enc.shape() == Shape{1, 2 + 2 * 2 * 2});
    CHECK(enc.data()[0] == 0.25);
    CHECK(enc.data()[1] == -0.5);
}

TEST_CASE("field config JSON round trip") {
    FieldConfig config = small_config();
    config.uv_topology = "sphere";
    FieldConfig back = field_config_from_json(field_config_to_json(config));
    CHECK(back.enc.k_position == config.enc.k_position);
    CHECK(back.density.width == config.density.width);
    CHECK(back.texture.depth == config.texture.depth);
    CHECK(back.uv_topology == config.uv_topology);
    CHECK(back.init_seed == config.init_seed);
}

TEST_CASE("density is nonnegative and uv is unit-norm") {
    FieldSet fields(small_config());
    Rng rng(2);
    Tensor x = random_tensor({64, 3}, rng, -1, 1, false);
    Tensor sigma = fields.eval_density(x);
    CHECK(sigma.shape() == Shape{64, 1});
    for (double s : sigma.data()) CHECK(s >= 0.0);
    Tensor u = fields.eval_uv(x);
    CHECK(u.shape() == Shape{64, 3});
    for (long i = 0; i < 64; ++i) {
        const double n = std::hypot(u.data()[3 * i], u.data()[3 * i + 1], u.data()[3 * i + 2]);
        CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("inverse mapping starts near the origin and stays in the box") {
    FieldSet fields(small_config());
    Rng rng(3);
    Tensor u = fields.eval_uv(random_tensor({32, 3}, rng, -1, 1, false));
    Tensor x = fields.eval_uv_inv(u);
    for (double v : x.data()) {
        CHECK(std::abs(v) < 1.0);   // tanh range
        CHECK(std::abs(v) < 0.25);  // near-zero init
    }
}

TEST_CASE("texture output lies in the unit color cube") {
    FieldSet fields(small_config());
    Rng rng(4);
    Tensor x = random_tensor({16, 3}, rng, -1, 1, false);
    Tensor u = fields.eval_uv(x);
    std::vector<double> d(16 * 3);
    for (int i = 0; i < 16; ++i) {
        d[3 * i] = 0;
        d[3 * i + 1] = 0;
        d[3 * i + 2] = 1;
    }
    Tensor dirs = Tensor::from_vector({16, 3}, std::move(d));
    Tensor c = fields.eval_texture(u, dirs);
    CHECK(c.shape() == Shape{16, 3});
    for (double v : c.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("texture rejects non-unit view directions") {
    FieldSet fields(small_config());
    Tensor u = Tensor::from_vector({1, 3}, {0, 0, 1});
    Tensor bad = Tensor::from_vector({1, 3}, {0, 0, 2});
    CHECK_THROWS_AS(fields.eval_texture(u, bad), std::runtime_error);
}

TEST_CASE("field evaluation is deterministic for a fixed init seed") {
    FieldSet a(small_config());
    FieldSet b(small_config());
    CHECK(a.density_at({0.2, -0.1, 0.4}) == b.density_at({0.2, -0.1, 0.4}));
}

TEST_CASE("clone shares values but not gradient state") {
    FieldSet fields(small_config());
    FieldSet copy = fields.clone();
    const auto& a = fields.params().items();
    const auto& b = copy.params().items();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        REQUIRE(a[i].second.numel() == b[i].second.numel());
        CHECK(a[i].second.data()[0] == b[i].second.data()[0]);
        CHECK(a[i].second.node() != b[i].second.node());
    }
}

TEST_CASE("field gradients flow through the composed evaluators") {
    FieldSet fields(small_config());
    Rng rng(8);
    Tensor x = random_tensor({4, 3}, rng, -0.5, 0.5, false);
    std::vector<Tensor> params;
    for (const auto& item : fields.params().items()) params.push_back(item.second);
    const double err = neutex::testing::max_grad_error(
        [&](const std::vector<Tensor>&) {
            Tensor u = fields.eval_uv(x);
            Tensor back = fields.eval_uv_inv(u);
            Tensor sigma = fields.eval_density(x);
            return add(sum(square(back)), sum(sigma));
        },
        params, 1e-5);
    CHECK(err < 1e-5);
}

TEST_CASE("radiance_at composes density and texture") {
    FieldSet fields(small_config());
    auto [sigma, rgb] = fields.radiance_at({0.1, 0.2, 0.3}, {0, 0, 1});
    CHECK(sigma == doctest::Approx(fields.density_at({0.1, 0.2, 0.3})));
    UVPoint u = fields.uv_at({0.1, 0.2, 0.3});
    auto direct = fields.texture_at(u, {0, 0, 1});
    for (int k = 0; k < 3; ++k) CHECK(rgb[k] == doctest::Approx(direct[k]).epsilon(1e-14));
}
