// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "neutex/dataset.hpp"
#include "neutex/rng.hpp"

using namespace neutex;

namespace {
const char* kTmpRoot = "/tmp/neutex_test_dataset";
}

TEST_CASE("point cloud PLY round trip") {
    Rng rng(1);
    std::vector<Vec3> points;
    for (int i = 0; i < 100; ++i) {
        points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    std::filesystem::create_directories(kTmpRoot);
    const std::string path = std::string(kTmpRoot) + "/cloud.ply";
    write_point_cloud(path, points);
    std::vector<Vec3> back = load_point_cloud(path);
    REQUIRE(back.size() == points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            CHECK(back[i][static_cast<size_t>(k)] ==
                  doctest::Approx(points[i][static_cast<size_t>(k)]).epsilon(1e-6));
        }
    }
    CHECK_THROWS_AS(load_point_cloud(std::string(kTmpRoot) + "/missing.ply"),
                    std::runtime_error);
}

TEST_CASE("voxel downsample lands in the requested band") {
    Rng rng(2);
    std::vector<Vec3> points;
    for (int i = 0; i < 20000; ++i) {
        // clustered so naive uniform grids need the search to hit the band
        const double r = 0.5 + 0.02 * rng.normal();
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        points.push_back((r / norm(dir)) * dir);
    }
    std::vector<Vec3> down = downsample_point_cloud(points, 2000, 3000);
    CHECK(down.size() >= 2000);
    CHECK(down.size() <= 3000);
    // too few inputs cannot reach the band
    std::vector<Vec3> tiny(points.begin(), points.begin() + 10);
    CHECK_THROWS_AS(downsample_point_cloud(tiny, 2000, 3000), std::runtime_error);
    // already in band passes through
    std::vector<Vec3> mid(points.begin(), points.begin() + 2500);
    CHECK(downsample_point_cloud(mid, 2000, 3000).size() == 2500);
}

TEST_CASE("shell scene density and texture behave analytically") {
    ShellScene scene;
    // density peaks at the shell radius and decays away from it
    const double peak = scene.density({scene.radius, 0, 0});
    CHECK(peak == doctest::Approx(scene.sigma0));
    CHECK(scene.density({scene.radius + 4 * scene.width, 0, 0}) < 0.05 * peak);
    CHECK(scene.density({0.05, 0, 0}) < peak);
    // uv is the radial direction
    const Vec3 u = scene.uv({0.3, -0.4, 0.1});
    CHECK(std::abs(norm(u) - 1.0) < 1e-12);
    const Vec3 expected = normalized(Vec3{0.3, -0.4, 0.1});
    for (int k = 0; k < 3; ++k) {
        CHECK(u[static_cast<size_t>(k)] ==
              doctest::Approx(expected[static_cast<size_t>(k)]));
    }
    // texture stays in the unit cube
    Rng rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        dir = normalized(dir);
        const Vec3 c = scene.texture(dir, {0, 0, 1});
        for (double v : c) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("synthetic generation round trips through the loader") {
    SynthConfig config;
    config.n_views = 4;
    config.resolution = 16;
    config.quadrature_samples = 128;
    config.point_cloud_size = 200;
    const std::string dir = std::string(kTmpRoot) + "/synth";
    std::filesystem::remove_all(dir);
    SceneDataset generated = generate_synthetic(config, dir);
    SceneDataset loaded = load_dataset(dir);
    REQUIRE(loaded.view_count() == 4);
    REQUIRE(loaded.images.size() == generated.images.size());
    CHECK(loaded.point_cloud.size() == generated.point_cloud.size());
    // PNG quantization: loaded pixels within half a step of the rendered ones
    for (size_t v = 0; v < 4; ++v) {
        REQUIRE(loaded.images[v].data.size() == generated.images[v].data.size());
        for (size_t i = 0; i < loaded.images[v].data.size(); ++i) {
            CHECK(std::abs(loaded.images[v].data[i] - generated.images[v].data[i]) <=
                  0.5 / 255.0 + 1e-12);
        }
        for (double m : loaded.masks[v].data) CHECK((m == 0.0 || m == 1.0));
    }
    // synthetic scene is generated pre-normalized
    CHECK(loaded.normalization.scale == doctest::Approx(1.0));
    // cameras look at the origin: the center ray passes near it
    for (const Camera& cam : loaded.cameras) {
        Rng rng(4);
        Ray ray = generate_ray(cam, 8, 8, false, rng);
        const Vec3 closest =
            ray.origin + std::max(0.0, -dot(ray.origin, ray.direction)) * ray.direction;
        CHECK(norm(closest) < 0.1);
    }
}

TEST_CASE("loader rejects non-binary masks") {
    SynthConfig config;
    config.n_views = 2;
    config.resolution = 8;
    config.quadrature_samples = 64;
    config.point_cloud_size = 50;
    const std::string dir = std::string(kTmpRoot) + "/badmask";
    std::filesystem::remove_all(dir);
    generate_synthetic(config, dir);
    Image gray = Image::create(8, 8, 1, 0.5);
    write_png(dir + "/masks/0001.png", gray);
    CHECK_THROWS_AS(load_dataset(dir), std::runtime_error);
}

TEST_CASE("loader reports missing and inconsistent layouts") {
    CHECK_THROWS_AS(load_dataset(std::string(kTmpRoot) + "/nowhere"), std::runtime_error);
    SynthConfig config;
    config.n_views = 2;
    config.resolution = 8;
    config.quadrature_samples = 64;
    config.point_cloud_size = 50;
    const std::string dir = std::string(kTmpRoot) + "/short";
    std::filesystem::remove_all(dir);
    generate_synthetic(config, dir);
    std::filesystem::remove(dir + "/images/0001.png");
    CHECK_THROWS_AS(load_dataset(dir), std::runtime_error);
}
