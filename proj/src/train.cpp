// SPDX-License-Identifier: Apache-2.0

#include "neutex/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "neutex/checkpoint.hpp"
#include "neutex/render.hpp"

namespace neutex {

namespace {

constexpr int kChunkRays = 64;

struct RayRecord {
    Vec3 origin, direction;
    std::vector<double> t, delta;
    Vec3 rgb_gt;
    double mask_gt = 0.0;
};

struct ChunkResult {
    std::vector<double> grad;  // flat, parameter-map order
    double render_sum = 0.0;
    double cycle_sum = 0.0;
    double mask_sum = 0.0;
    bool finite = true;
};

struct PhaseCoeffs {
    double render = 1.0, cycle = 0.0, mask = 1.0;
};

Tensor const_rows(const std::vector<Vec3>& rows) {
    std::vector<double> v(rows.size() * 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t k = 0; k < 3; ++k) v[3 * i + k] = rows[i][k];
    }
    return Tensor::from_vector({static_cast<long>(rows.size()), 3}, std::move(v));
}

// Forward + backward over one fixed chunk of rays against a private clone of
// the parameters. Pure function of (parameter values, chunk contents), so the
// result is bitwise independent of scheduling.
ChunkResult process_chunk(const FieldSet& master, std::span<const RayRecord> rays,
                          const PhaseCoeffs& coeffs, long batch_rays, int n_samples,
                          bool detach_cycle_weights, bool mask_post_absorption,
                          bool texture_only) {
    const long rc = static_cast<long>(rays.size());
    const long m = rc * n_samples;
    FieldSet local = master.clone();
    if (texture_only) {
        for (const auto& [name, param] : local.params().items()) {
            if (!FieldSet::is_texture_param(name)) {
                Tensor p = param;  // aliasing handle
                p.set_requires_grad(false);
            }
        }
    }

    std::vector<double> xs(static_cast<size_t>(3 * m));
    std::vector<double> ds(static_cast<size_t>(3 * m));
    std::vector<double> deltas(static_cast<size_t>(m));
    std::vector<Vec3> gts(static_cast<size_t>(rc));
    std::vector<double> masks(static_cast<size_t>(rc));
    for (long r = 0; r < rc; ++r) {
        const RayRecord& ray = rays[static_cast<size_t>(r)];
        gts[static_cast<size_t>(r)] = ray.rgb_gt;
        masks[static_cast<size_t>(r)] = ray.mask_gt;
        for (int i = 0; i < n_samples; ++i) {
            const long row = r * n_samples + i;
            const Vec3 p = ray.origin + ray.t[static_cast<size_t>(i)] * ray.direction;
            for (size_t k = 0; k < 3; ++k) {
                xs[static_cast<size_t>(3 * row) + k] = p[k];
                ds[static_cast<size_t>(3 * row) + k] = ray.direction[k];
            }
            deltas[static_cast<size_t>(row)] = ray.delta[static_cast<size_t>(i)];
        }
    }

    Tape tape;
    TapeScope scope(tape);
    Tensor X = Tensor::from_vector({m, 3}, std::move(xs));
    Tensor D = Tensor::from_vector({m, 3}, std::move(ds));
    Tensor delta = Tensor::from_vector({rc, n_samples}, std::move(deltas));

    Tensor sigma = reshape(local.eval_density(X), {rc, n_samples});
    Tensor a = clamp_max(mul(sigma, delta), kSigmaDeltaClamp);
    Tensor trans = exp(neg(cumsum_exclusive(a)));            // T_i
    Tensor alpha = add_const(neg(exp(neg(a))), 1.0);         // 1 - exp(-a)
    Tensor w = mul(trans, alpha);                            // (rc, n)

    Tensor u = local.eval_uv(X);
    Tensor c = local.eval_texture(u, D);                     // (m, 3)
    Tensor w_flat = reshape(w, {m, 1});
    Tensor color = sum(reshape(mul(w_flat, c), {rc, n_samples, 3}), 1);  // (rc, 3)

    Tensor render_part = sum(square(sub(color, const_rows(gts))));

    Tensor t_final = mask_post_absorption
                         ? exp(neg(sum(a, 1, /*keepdim=*/true)))
                         : slice(trans, 1, n_samples - 1, n_samples);
    Tensor mask_gt = Tensor::from_vector({rc, 1}, std::move(masks));
    Tensor mask_part = sum(square(sub(mask_gt, add_const(neg(t_final), 1.0))));

    Tensor loss = add(scale(render_part, coeffs.render), scale(mask_part, coeffs.mask));
    Tensor cycle_part;
    if (coeffs.cycle != 0.0) {
        Tensor wts = w_flat;
        if (detach_cycle_weights) {
            std::vector<double> v(w_flat.data().begin(), w_flat.data().end());
            wts = Tensor::from_vector({m, 1}, std::move(v));
        }
        Tensor back = local.eval_uv_inv(u);
        Tensor resid = sum(square(sub(back, X)), -1, /*keepdim=*/true);
        cycle_part = sum(mul(wts, resid));
        loss = add(loss, scale(cycle_part, coeffs.cycle));
    }
    loss = scale(loss, 1.0 / static_cast<double>(batch_rays));

    ChunkResult result;
    result.render_sum = render_part.value();
    result.mask_sum = mask_part.value();
    result.cycle_sum = cycle_part.defined() ? cycle_part.value() : 0.0;
    result.finite = std::isfinite(loss.value());
    if (!result.finite) return result;

    tape.backward(loss);
    result.grad.reserve(static_cast<size_t>(local.params().total_values()));
    for (const auto& [name, param] : local.params().items()) {
        Tensor p = param;
        if (p.has_grad()) {
            auto g = p.grad();
            result.grad.insert(result.grad.end(), g.begin(), g.end());
        } else {
            result.grad.insert(result.grad.end(), static_cast<size_t>(p.numel()), 0.0);
        }
    }
    return result;
}

void append_loss_row(std::ofstream& log, long it, int phase, double render, double cycle,
                     double mask, double chamfer, double cycle2, double total) {
    log.precision(12);
    log << it << ',' << phase << ',' << render << ',' << cycle << ',' << mask << ','
        << chamfer << ',' << cycle2 << ',' << total << '\n';
    log.flush();
}

}  // namespace

int phase_of(long iteration, const TrainSchedule& schedule) {
    if (iteration < schedule.init_iters) return 1;
    if (iteration < schedule.init_iters + schedule.main_iters) return 2;
    return 3;
}

TrainResult train(const SceneDataset& dataset, FieldSet& fields,
                  const TrainSchedule& schedule, const LossWeights& weights,
                  const TrainOptions& options) {
    namespace fs = std::filesystem;
    if (schedule.batch_rays <= 0) throw std::runtime_error("train: batch_rays must be > 0");
    if (schedule.foreground_fraction < 0.0 || schedule.foreground_fraction > 1.0) {
        throw std::runtime_error("train: foreground_fraction outside [0,1]");
    }
    if (options.out_dir.empty()) throw std::runtime_error("train: out_dir not set");
    fs::create_directories(options.out_dir + "/checkpoints");

    Adam adam(options.adam);
    long start = 0;
    int resumed_phase = 0;
    if (!options.resume.empty()) {
        Checkpoint ckpt = load_checkpoint(options.resume);
        fields.copy_values_from(*ckpt.fields);
        restore_optimizer(adam, ckpt);
        start = ckpt.global_step;
        resumed_phase = ckpt.phase;
        (void)resumed_phase;
    }

    // initialization-phase fixtures: downsampled cloud + uniform UV samples
    std::vector<Vec3> cloud;
    std::vector<Vec3> uv_samples;
    const bool init_enabled = options.use_init_pointcloud && options.train_uv_inv &&
                              !dataset.point_cloud.empty() && schedule.init_iters > 0;
    if (init_enabled) {
        cloud = dataset.point_cloud.size() > options.cloud_max
                    ? downsample_point_cloud(dataset.point_cloud, options.cloud_min,
                                             options.cloud_max)
                    : dataset.point_cloud;
        Rng uv_rng = Rng::stream(options.seed, 0x75765f73616d70ULL);
        uv_samples = uniform_sphere_samples(options.n_uv_samples, uv_rng);
    }
    Tensor uv_samples_t = init_enabled ? const_rows(uv_samples) : Tensor();

    std::ofstream log(options.out_dir + "/loss_log.csv", std::ios::app);
    if (!log) throw std::runtime_error("train: cannot open loss log in " + options.out_dir);
    if (start == 0) {
        log << "iteration,phase,L_render,L_cycle,L_mask,L_chamfer,L_cycle2,total\n";
    }

    const long phase2_end_nominal = schedule.init_iters + schedule.main_iters;
    long phase2_end = phase2_end_nominal;
    long total_iters = phase2_end_nominal + schedule.finetune_iters;
    std::vector<double> render_history;  // smoothed early-stop input (phase 2)

    TrainResult result;
    auto save = [&](long step, int phase, const std::string& tag) {
        const std::string path = options.out_dir + "/checkpoints/" + tag + ".ntck";
        save_checkpoint(path, fields, adam, step, phase);
        result.last_checkpoint = path;
        return path;
    };

    const auto& all_params = fields.params().items();
    auto trainable_for = [&](int phase) {
        std::vector<std::pair<std::string, Tensor>> subset;
        for (const auto& item : all_params) {
            if (phase == 3 && !FieldSet::is_texture_param(item.first)) continue;
            if (!options.train_uv_inv && item.first.rfind("uv_inv.", 0) == 0) continue;
            subset.push_back(item);
        }
        return subset;
    };

    long it = start;
    while (it < total_iters) {
        const int phase = (it < schedule.init_iters) ? 1 : (it < phase2_end ? 2 : 3);
        const bool phase1 = (phase == 1) && init_enabled;
        PhaseCoeffs coeffs;
        if (phase1) {
            coeffs = {weights.init_b, 0.0, weights.init_c};
        } else {
            coeffs = {1.0, weights.a1, weights.a2};
        }

        Rng rng = Rng::stream(options.seed, static_cast<uint64_t>(it) + 1);
        std::vector<BatchPixel> batch =
            sample_batch(dataset, rng, schedule.batch_rays, schedule.foreground_fraction,
                         options.heldout);

        std::vector<RayRecord> rays;
        rays.reserve(batch.size());
        double miss_render = 0.0, miss_mask = 0.0;
        for (const BatchPixel& p : batch) {
            const Camera& cam = dataset.cameras[static_cast<size_t>(p.image)];
            Ray ray = generate_ray(cam, p.px, p.py, /*jitter=*/true, rng);
            if (!ray.hit) {
                miss_render += dot(p.rgb, p.rgb);
                miss_mask += p.mask * p.mask;
                continue;
            }
            RaySamples samples = sample_stratified(ray, options.n_samples, /*jitter=*/true, rng);
            RayRecord rec;
            rec.origin = ray.origin;
            rec.direction = ray.direction;
            rec.t = std::move(samples.t);
            rec.delta = std::move(samples.delta);
            rec.rgb_gt = p.rgb;
            rec.mask_gt = p.mask;
            rays.push_back(std::move(rec));
        }

        const long n_chunks = (static_cast<long>(rays.size()) + kChunkRays - 1) / kChunkRays;
        std::vector<ChunkResult> chunks(static_cast<size_t>(n_chunks));
        auto run_chunk = [&](long ci) {
            const size_t lo = static_cast<size_t>(ci) * kChunkRays;
            const size_t hi = std::min(lo + kChunkRays, rays.size());
            chunks[static_cast<size_t>(ci)] = process_chunk(
                fields, std::span<const RayRecord>(rays.data() + lo, hi - lo), coeffs,
                schedule.batch_rays, options.n_samples, options.detach_cycle_weights,
                options.mask_post_absorption, phase == 3);
        };
        if (options.threads <= 1 || n_chunks <= 1) {
            for (long ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
        } else {
            const int workers = std::min<long>(options.threads, n_chunks);
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (long ci = w; ci < n_chunks; ci += workers) run_chunk(ci);
                });
            }
            for (auto& t : pool) t.join();
        }

        double render_sum = miss_render, cycle_sum = 0.0, mask_sum = miss_mask;
        bool finite = true;
        fields.params().zero_grads();
        size_t offset = 0;
        for (const ChunkResult& chunk : chunks) {
            render_sum += chunk.render_sum;
            cycle_sum += chunk.cycle_sum;
            mask_sum += chunk.mask_sum;
            finite = finite && chunk.finite;
        }
        if (finite) {
            // fixed-order reduction into the master gradients
            for (const ChunkResult& chunk : chunks) {
                offset = 0;
                for (const auto& item : all_params) {
                    Tensor p = item.second;
                    auto g = p.grad();
                    for (size_t i = 0; i < g.size(); ++i) g[i] += chunk.grad[offset + i];
                    offset += g.size();
                }
            }
        }

        double chamfer_value = 0.0, cycle2_value = 0.0;
        if (phase1 && finite) {
            Tape tape;
            TapeScope scope(tape);
            Tensor pred = fields.eval_uv_inv(uv_samples_t);
            Tensor ch = chamfer_loss(pred, cloud);
            Tensor c2 = loss_cycle2(fields, uv_samples_t);
            chamfer_value = ch.value();
            cycle2_value = c2.value();
            Tensor init_terms = add(ch, scale(c2, weights.init_a));
            finite = std::isfinite(init_terms.value());
            if (finite) tape.backward(init_terms);
        }

        const double b = static_cast<double>(schedule.batch_rays);
        const double render_mean = render_sum / b;
        const double cycle_mean = cycle_sum / b;
        const double mask_mean = mask_sum / b;
        const double total = coeffs.render * render_mean + coeffs.cycle * cycle_mean +
                             coeffs.mask * mask_mean + chamfer_value +
                             weights.init_a * cycle2_value;
        if (!finite || !std::isfinite(total)) {
            nlohmann::json dump;
            dump["iteration"] = it;
            dump["phase"] = phase;
            dump["view"] = batch.empty() ? -1 : batch.front().image;
            dump["render_sum"] = render_sum;
            dump["cycle_sum"] = cycle_sum;
            dump["mask_sum"] = mask_sum;
            dump["chamfer"] = chamfer_value;
            dump["cycle2"] = cycle2_value;
            nlohmann::json pixels = nlohmann::json::array();
            for (const BatchPixel& p : batch) pixels.push_back({p.px, p.py});
            dump["pixels"] = pixels;
            std::ofstream os(options.out_dir + "/nan_dump.json");
            os << dump.dump(2) << '\n';
            std::fprintf(stderr, "train: non-finite loss at iteration %ld; aborting\n", it);
            result.aborted_nan = true;
            result.final_step = it;
            return result;
        }

        adam.step(trainable_for(phase));
        append_loss_row(log, it, phase, render_mean, cycle_mean, mask_mean, chamfer_value,
                        cycle2_value, total);

        if (phase == 2 && options.early_stop) {
            render_history.push_back(render_mean);
            const long n = static_cast<long>(render_history.size());
            if (n >= options.early_stop_lag + options.early_stop_window) {
                auto window_mean = [&](long end) {
                    double s = 0.0;
                    for (long i = end - options.early_stop_window; i < end; ++i) {
                        s += render_history[static_cast<size_t>(i)];
                    }
                    return s / static_cast<double>(options.early_stop_window);
                };
                const double now = window_mean(n);
                const double before = window_mean(n - options.early_stop_lag);
                if (before - now < options.early_stop_rel * std::max(before, 1e-12)) {
                    const long skipped = phase2_end - (it + 1);
                    phase2_end = it + 1;
                    total_iters -= skipped;
                }
            }
        }

        ++it;
        char tag[64];
        if (it == schedule.init_iters && schedule.main_iters > 0) {
            save(it, 1, "phase1_end");
        }
        if (it == phase2_end && schedule.finetune_iters > 0) {
            result.phase2_end_checkpoint = save(it, 2, "phase2_end");
        }
        if (options.checkpoint_every > 0 && it % options.checkpoint_every == 0 &&
            it < total_iters) {
            std::snprintf(tag, sizeof(tag), "step_%08ld", it);
            save(it, phase, tag);
        }
    }

    result.final_step = it;
    save(it, phase_of(it - 1, schedule), "final");
    return result;
}

}  // namespace neutex
