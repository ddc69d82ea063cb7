// SPDX-License-Identifier: Apache-2.0

#include "neutex/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "neutex/rng.hpp"

namespace neutex {

CompositeResult composite(std::span<const double> sigma,
                          std::span<const Vec3> rgb,
                          std::span<const double> delta) {
    const size_t n = sigma.size();
    if (rgb.size() != n || delta.size() != n) {
        throw std::runtime_error("composite: array length mismatch");
    }
    CompositeResult out;
    out.transmittance.resize(n);
    out.weight.resize(n);
    double optical_depth = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (sigma[i] < 0.0) throw std::runtime_error("composite: negative density");
        if (delta[i] <= 0.0) throw std::runtime_error("composite: non-positive segment length");
        const double a = std::min(sigma[i] * delta[i], kSigmaDeltaClamp);
        const double t = std::exp(-optical_depth);
        const double w = t * (1.0 - std::exp(-a));
        out.transmittance[i] = t;
        out.weight[i] = w;
        out.color[0] += w * rgb[i][0];
        out.color[1] += w * rgb[i][1];
        out.color[2] += w * rgb[i][2];
        optical_depth += a;
    }
    out.final_transmittance = std::exp(-optical_depth);
    return out;
}

PixelRender render_pixel(const RadianceField& field, const Camera& camera,
                         int px, int py, const RenderOptions& options) {
    Rng rng = Rng::stream(options.seed,
                          static_cast<uint64_t>(py) * static_cast<uint64_t>(camera.width) +
                              static_cast<uint64_t>(px));
    Ray ray = generate_ray(camera, px, py, options.jitter, rng);
    PixelRender out;
    if (!ray.hit) return out;  // background: I=(0,0,0), T=1, no samples
    out.hit = true;
    RaySamples samples = sample_stratified(ray, options.n_samples, options.jitter, rng);
    const size_t n = samples.t.size();
    out.positions.resize(n);
    for (size_t i = 0; i < n; ++i) {
        out.positions[i] = ray.origin + samples.t[i] * ray.direction;
    }
    std::vector<double> sigma(n);
    std::vector<Vec3> rgb(n);
    const bool want_uv = options.want_uv && field.has_uv();
    if (want_uv) out.uv.resize(n);
    field.eval(out.positions, ray.direction, sigma, rgb,
               want_uv ? std::span<Vec3>(out.uv) : std::span<Vec3>());
    CompositeResult comp = composite(sigma, rgb, samples.delta);
    out.color = comp.color;
    out.final_transmittance = comp.final_transmittance;
    out.weight = std::move(comp.weight);
    return out;
}

RenderResult render_image(const RadianceField& field, const Camera& camera,
                          const RenderOptions& options) {
    RenderResult result;
    result.color = Image::create(camera.width, camera.height, 3);
    result.transmittance = Image::create(camera.width, camera.height, 1);
    const size_t total = static_cast<size_t>(camera.width) * static_cast<size_t>(camera.height);
    if (options.want_uv) result.attribution.resize(total);

    auto render_range = [&](size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            const int px = static_cast<int>(p % static_cast<size_t>(camera.width));
            const int py = static_cast<int>(p / static_cast<size_t>(camera.width));
            PixelRender pr = render_pixel(field, camera, px, py, options);
            for (int c = 0; c < 3; ++c) result.color.at(px, py, c) = pr.color[static_cast<size_t>(c)];
            result.transmittance.at(px, py, 0) = pr.final_transmittance;
            if (options.want_uv) {
                PixelAttribution& attr = result.attribution[p];
                attr.hit = pr.hit;
                attr.opacity = 1.0 - pr.final_transmittance;
                if (pr.hit && !pr.weight.empty()) {
                    size_t best = 0;
                    for (size_t i = 1; i < pr.weight.size(); ++i) {
                        if (pr.weight[i] > pr.weight[best]) best = i;
                    }
                    attr.top_weight = pr.weight[best];
                    attr.position = pr.positions[best];
                    if (!pr.uv.empty()) attr.uv = pr.uv[best];
                }
            }
        }
    };

    const int threads = std::max(1, options.threads);
    if (threads == 1) {
        render_range(0, total);
    } else {
        // fixed chunk grid; threads pull chunks by index so the output is
        // identical for any worker count
        const size_t chunk = static_cast<size_t>(std::max(1, options.chunk_size));
        const size_t n_chunks = (total + chunk - 1) / chunk;
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (;;) {
                    const size_t c = next.fetch_add(1);
                    if (c >= n_chunks) return;
                    const size_t begin = c * chunk;
                    render_range(begin, std::min(begin + chunk, total));
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return result;
}

}  // namespace neutex
