// SPDX-License-Identifier: Apache-2.0

#include "neutex/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace neutex {

namespace {

Tensor const_like(const Tensor& t) {
    std::vector<double> v(t.data().begin(), t.data().end());
    return Tensor::from_vector(t.shape(), std::move(v));
}

Tensor points_tensor(std::span<const Vec3> rows) {
    std::vector<double> v(rows.size() * 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t k = 0; k < 3; ++k) v[3 * i + k] = rows[i][k];
    }
    return Tensor::from_vector({static_cast<long>(rows.size()), 3}, std::move(v));
}

}  // namespace

Tensor loss_render(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw std::runtime_error("loss_render: shape mismatch " + shape_str(pred.shape()) +
                                 " vs " + shape_str(target.shape()));
    }
    const long rays = pred.dim(0);
    return scale(sum(square(sub(pred, target))), 1.0 / static_cast<double>(rays));
}

Tensor loss_cycle(const FieldSet& fields, const Tensor& x, const Tensor& w,
                  long batch_rays, bool detach_weights) {
    if (x.dim(0) != w.dim(0)) {
        throw std::runtime_error("loss_cycle: sample/weight length mismatch " +
                                 shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    }
    const Tensor weights = detach_weights ? const_like(w) : w;
    Tensor u = fields.eval_uv(x);
    Tensor back = fields.eval_uv_inv(u);
    Tensor resid = sum(square(sub(back, x)), -1, /*keepdim=*/true);  // (M,1)
    return scale(sum(mul(weights, resid)), 1.0 / static_cast<double>(batch_rays));
}

Tensor loss_mask(const Tensor& t_final, const Tensor& mask) {
    if (t_final.shape() != mask.shape()) {
        throw std::runtime_error("loss_mask: shape mismatch " + shape_str(t_final.shape()) +
                                 " vs " + shape_str(mask.shape()));
    }
    const long rays = t_final.dim(0);
    Tensor opacity = add_const(neg(t_final), 1.0);
    return scale(sum(square(sub(mask, opacity))), 1.0 / static_cast<double>(rays));
}

Tensor loss_total(const Tensor& render, const Tensor& cycle, const Tensor& mask,
                  const LossWeights& weights) {
    Tensor total = render;
    if (weights.a1 != 0.0) total = add(total, scale(cycle, weights.a1));
    if (weights.a2 != 0.0) total = add(total, scale(mask, weights.a2));
    return total;
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw std::runtime_error("chamfer_distance: empty point set");
    auto one_sided = [](std::span<const Vec3> from, std::span<const Vec3> to) {
        double total = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) {
                const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            total += best;
        }
        return total / static_cast<double>(from.size());
    };
    return one_sided(a, b) + one_sided(b, a);
}

Tensor chamfer_loss(const Tensor& pred, const std::vector<Vec3>& target) {
    if (target.empty()) throw std::runtime_error("chamfer_loss: empty target set");
    const long n = pred.dim(0);
    if (n == 0) throw std::runtime_error("chamfer_loss: empty prediction set");
    auto pv = pred.data();
    auto row = [&](long i) {
        return Vec3{pv[static_cast<size_t>(3 * i)], pv[static_cast<size_t>(3 * i) + 1],
                    pv[static_cast<size_t>(3 * i) + 2]};
    };
    // correspondence from current values; fixed during backprop
    std::vector<Vec3> nearest_target(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        const Vec3 p = row(i);
        double best = std::numeric_limits<double>::infinity();
        size_t arg = 0;
        for (size_t j = 0; j < target.size(); ++j) {
            const Vec3& q = target[j];
            const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best) {
                best = d2;
                arg = j;
            }
        }
        nearest_target[static_cast<size_t>(i)] = target[arg];
    }
    std::vector<long> nearest_pred(target.size());
    for (size_t j = 0; j < target.size(); ++j) {
        const Vec3& q = target[j];
        double best = std::numeric_limits<double>::infinity();
        long arg = 0;
        for (long i = 0; i < n; ++i) {
            const Vec3 p = row(i);
            const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best) {
                best = d2;
                arg = i;
            }
        }
        nearest_pred[j] = arg;
    }
    Tensor term_a = scale(sum(square(sub(pred, points_tensor(nearest_target)))),
                          1.0 / static_cast<double>(n));
    Tensor gathered = index_select(pred, nearest_pred);
    Tensor term_b = scale(sum(square(sub(gathered, points_tensor(target)))),
                          1.0 / static_cast<double>(target.size()));
    return add(term_a, term_b);
}

Tensor loss_cycle2(const FieldSet& fields, const Tensor& uv_samples) {
    Tensor x = fields.eval_uv_inv(uv_samples);
    Tensor u = fields.eval_uv(x);
    const long m = uv_samples.dim(0);
    return scale(sum(square(sub(u, uv_samples))), 1.0 / static_cast<double>(m));
}

Tensor loss_init(const Tensor& chamfer, const Tensor& cycle2, const Tensor& render,
                 const Tensor& mask, const LossWeights& weights) {
    Tensor total = chamfer;
    if (weights.init_a != 0.0) total = add(total, scale(cycle2, weights.init_a));
    if (weights.init_b != 0.0) total = add(total, scale(render, weights.init_b));
    if (weights.init_c != 0.0) total = add(total, scale(mask, weights.init_c));
    return total;
}

std::vector<Vec3> uniform_sphere_samples(int n, Rng& rng) {
    std::vector<Vec3> out(static_cast<size_t>(n));
    for (auto& u : out) {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        u = {r * std::cos(phi), r * std::sin(phi), z};
    }
    return out;
}

std::vector<BatchPixel> sample_batch(const SceneDataset& dataset, Rng& rng,
                                     int batch_rays, double foreground_fraction,
                                     const std::vector<int>& exclude_views) {
    if (batch_rays <= 0) throw std::runtime_error("sample_batch: batch_rays must be > 0");
    if (foreground_fraction < 0.0 || foreground_fraction > 1.0) {
        throw std::runtime_error("sample_batch: foreground_fraction outside [0,1]");
    }
    std::vector<int> allowed;
    allowed.reserve(dataset.view_count());
    for (size_t v = 0; v < dataset.view_count(); ++v) {
        const int vi = static_cast<int>(v);
        if (std::find(exclude_views.begin(), exclude_views.end(), vi) ==
            exclude_views.end()) {
            allowed.push_back(vi);
        }
    }
    if (allowed.empty()) {
        throw std::runtime_error("sample_batch: every view is excluded");
    }
    const int view = allowed[rng.below(allowed.size())];
    const Image& img = dataset.images[static_cast<size_t>(view)];
    const Image& mask = dataset.masks[static_cast<size_t>(view)];
    std::vector<std::pair<int, int>> fg, bg;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            (mask.at(x, y, 0) > 0.5 ? fg : bg).emplace_back(x, y);
        }
    }
    long n_fg = std::lround(foreground_fraction * batch_rays);
    if (fg.empty()) {
        if (n_fg > 0) {
            std::fprintf(stderr,
                         "sample_batch: view %d has an empty foreground; drawing an "
                         "all-background batch\n",
                         view);
        }
        n_fg = 0;
    }
    if (bg.empty()) n_fg = batch_rays;
    std::vector<BatchPixel> batch;
    batch.reserve(static_cast<size_t>(batch_rays));
    for (int i = 0; i < batch_rays; ++i) {
        const auto& pool = (i < n_fg) ? fg : bg;
        const auto [px, py] = pool[rng.below(pool.size())];
        BatchPixel p;
        p.image = view;
        p.px = px;
        p.py = py;
        p.mask = mask.at(px, py, 0);
        p.rgb = {img.at(px, py, 0), img.at(px, py, 1), img.at(px, py, 2)};
        batch.push_back(p);
    }
    return batch;
}

}  // namespace neutex
