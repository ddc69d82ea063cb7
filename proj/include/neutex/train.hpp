// SPDX-License-Identifier: Apache-2.0
//
// Three-phase training loop: Chamfer-based initialization, full-loss main
// phase, and texture-only fine-tuning. Deterministic under a fixed seed for
// any worker count: every iteration derives its own RNG stream, rays are
// processed in fixed 64-ray chunks against per-chunk parameter clones, and
// gradients are reduced in chunk order.

#pragma once

#include <cstdint>
#include <string>

#include "neutex/dataset.hpp"
#include "neutex/fields.hpp"
#include "neutex/losses.hpp"
#include "neutex/nn.hpp"

namespace neutex {

struct TrainSchedule {
    long init_iters = 2000;
    long main_iters = 20000;
    long finetune_iters = 2000;
    int batch_rays = 512;
    double foreground_fraction = 2.0 / 3.0;
};

struct TrainOptions {
    uint64_t seed = 1;
    int threads = 1;
    int n_samples = 64;        // per-ray stratified samples
    long checkpoint_every = 2000;
    bool use_init_pointcloud = true;
    bool detach_cycle_weights = true;
    // mask loss transmittance: after the last segment's absorption (default)
    // or before it
    bool mask_post_absorption = true;
    bool train_uv_inv = true;  // ablation: freeze the inverse mapping entirely
    bool early_stop = false;   // smoothed-plateau stop for the main phase
    double early_stop_rel = 1e-4;
    long early_stop_lag = 10000;
    long early_stop_window = 500;
    size_t cloud_min = 2000, cloud_max = 3000;
    int n_uv_samples = 2500;
    std::vector<int> heldout;  // view indices excluded from batch sampling
    AdamConfig adam;
    std::string out_dir;  // receives checkpoints/ and loss_log.csv
    std::string resume;   // checkpoint path; empty starts fresh
};

struct TrainResult {
    long final_step = 0;
    bool aborted_nan = false;
    std::string last_checkpoint;
    std::string phase2_end_checkpoint;
};

int phase_of(long iteration, const TrainSchedule& schedule);

TrainResult train(const SceneDataset& dataset, FieldSet& fields,
                  const TrainSchedule& schedule, const LossWeights& weights,
                  const TrainOptions& options);

}  // namespace neutex
