// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include <doctest.h>

#include "neutex/metrics.hpp"
#include "neutex/rng.hpp"

using namespace neutex;

namespace {
Image random_image(int w, int h, Rng& rng) {
    Image img = Image::create(w, h, 3);
    for (double& v : img.data) v = rng.uniform(0, 1);
    return img;
}
}  // namespace

TEST_CASE("psnr closed forms") {
    Image a = Image::create(8, 8, 3, 0.5);
    Image b = a;
    CHECK(psnr(a, b) == std::numeric_limits<double>::infinity());
    // uniform offset 0.1 -> MSE 0.01 -> 20 dB
    for (double& v : b.data) v += 0.1;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    Image c = Image::create(4, 4, 3);
    CHECK_THROWS_AS(psnr(a, c), std::runtime_error);
}

TEST_CASE("psnr is symmetric") {
    Rng rng(1);
    Image a = random_image(16, 16, rng);
    Image b = random_image(16, 16, rng);
    CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("ssim identity, symmetry, and bounds") {
    Rng rng(2);
    Image a = random_image(24, 24, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    Image b = random_image(24, 24, rng);
    const double s = ssim(a, b);
    CHECK(s == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
    Image c = Image::create(12, 12, 3);
    CHECK_THROWS_AS(ssim(a, c), std::runtime_error);
}

TEST_CASE("ssim of two different constants reduces to the luminance term") {
    Image a = Image::create(16, 16, 3, 0.2);
    Image b = Image::create(16, 16, 3, 0.6);
    // zero variance: SSIM = (2 mu_a mu_b + C1)/(mu_a^2 + mu_b^2 + C1)
    const double c1 = 0.01 * 0.01;
    const double expected = (2 * 0.2 * 0.6 + c1) / (0.2 * 0.2 + 0.6 * 0.6 + c1);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ssim penalizes anti-correlated structure") {
    Image a = Image::create(24, 24, 3, 0.5);
    Image b = a;
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) {
            const double bump = ((x + y) % 2 == 0) ? 0.25 : -0.25;
            for (int c = 0; c < 3; ++c) {
                a.at(x, y, c) = 0.5 + bump;
                b.at(x, y, c) = 0.5 - bump;
            }
        }
    }
    CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("masked ssim only counts interior foreground windows") {
    Rng rng(3);
    Image a = random_image(32, 32, rng);
    Image b = a;
    // corrupt the left half; mask keeps only the right half
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) b.at(x, y, c) = rng.uniform(0, 1);
        }
    }
    Image mask = Image::create(32, 32, 1, 0.0);
    for (int y = 0; y < 32; ++y) {
        for (int x = 16; x < 32; ++x) mask.at(x, y, 0) = 1.0;
    }
    CHECK(ssim(a, b, &mask) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) < 1.0);
}

TEST_CASE("eval report aggregates and serializes") {
    EvalReport report = EvalReport::build(
        {{"0000", 20.0, 0.8}, {"0001", 30.0, 0.9}}, /*masked=*/true);
    CHECK(report.mean_psnr == doctest::Approx(25.0));
    CHECK(report.mean_ssim == doctest::Approx(0.85));
    CHECK(report.masked);
    const std::string json = report.to_json();
    CHECK(json.find("\"0001\"") != std::string::npos);
    const std::string csv = report.to_csv();
    // header plus one row per view
    long rows = static_cast<long>(std::count(csv.begin(), csv.end(), '\n'));
    CHECK(rows >= 3);

    // infinite PSNR must survive JSON serialization
    EvalReport perfect = EvalReport::build(
        {{"0000", std::numeric_limits<double>::infinity(), 1.0}}, false);
    CHECK(perfect.to_json().find("inf") != std::string::npos);
}
