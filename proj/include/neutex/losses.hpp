// SPDX-License-Identifier: Apache-2.0
//
// Training losses: rendering, cycle, mask, and the Chamfer-based
// initialization terms, plus batch pixel sampling.

#pragma once

#include <span>
#include <vector>

#include "neutex/dataset.hpp"
#include "neutex/fields.hpp"
#include "neutex/rng.hpp"
#include "neutex/tensor.hpp"
#include "neutex/vec.hpp"

namespace neutex {

struct LossWeights {
    double a1 = 1.0;       // cycle weight in the full loss
    double a2 = 1.0;       // mask weight in the full loss
    double init_a = 100.0; // inverse-cycle weight in the initialization loss
    double init_b = 1.0;   // render weight (initialization)
    double init_c = 1.0;   // mask weight (initialization)
};

// Mean over rays of the per-ray squared L2 color error. Both (R,3).
Tensor loss_render(const Tensor& pred, const Tensor& target);

// Per-ray sum_i w_i ||F_uv_inv(F_uv(x_i)) - x_i||^2, averaged over
// `batch_rays`. `x` holds all sample positions of the batch flattened to
// (M,3); `w` the matching contribution weights (M,1). With detach_weights the
// weights enter as constants so the cycle term cannot push on the geometry.
Tensor loss_cycle(const FieldSet& fields, const Tensor& x, const Tensor& w,
                  long batch_rays, bool detach_weights = true);

// Mean over rays of (M_gt - (1 - T_final))^2. Both (R,1).
Tensor loss_mask(const Tensor& t_final, const Tensor& mask);

// L = L_render + a1 L_cycle + a2 L_mask.
Tensor loss_total(const Tensor& render, const Tensor& cycle, const Tensor& mask,
                  const LossWeights& weights);

// Symmetric mean of squared nearest-neighbor distances (A->B plus B->A).
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

// Differentiable Chamfer term between the rows of `pred` and a fixed point
// set; nearest-neighbor correspondence is computed outside the tape, so
// gradients flow through the distances at fixed matching.
Tensor chamfer_loss(const Tensor& pred, const std::vector<Vec3>& target);

// Mean over samples of ||F_uv(F_uv_inv(u)) - u||^2 for u on S^2, (M,3).
Tensor loss_cycle2(const FieldSet& fields, const Tensor& uv_samples);

// L_init = L_chamfer + init_a L_cycle2 + init_b L_render + init_c L_mask.
Tensor loss_init(const Tensor& chamfer, const Tensor& cycle2, const Tensor& render,
                 const Tensor& mask, const LossWeights& weights);

// Area-preserving uniform sampling of S^2.
std::vector<Vec3> uniform_sphere_samples(int n, Rng& rng);

struct BatchPixel {
    int image = 0;
    int px = 0, py = 0;
    double mask = 0.0;
    Vec3 rgb{0, 0, 0};
};

// Draws one batch from a single randomly selected view: round(f*B) foreground
// pixels, remainder background. An image with empty foreground yields an
// all-background batch (with a warning on stderr). Views listed in
// `exclude_views` (held-out evaluation views) are never selected.
std::vector<BatchPixel> sample_batch(const SceneDataset& dataset, Rng& rng,
                                     int batch_rays, double foreground_fraction,
                                     const std::vector<int>& exclude_views = {});

}  // namespace neutex
