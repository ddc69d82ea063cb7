// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "neutex/checkpoint.hpp"
#include "neutex/train.hpp"

using namespace neutex;

namespace {
const char* kTmpRoot = "/tmp/neutex_test_train";

FieldConfig tiny_config() {
    FieldConfig config;
    config.enc = {2, 2, 1};
    config.density = {2, 8, -1};
    config.uv = {2, 8, -1};
    config.uv_inv = {2, 8, -1};
    config.texture = {2, 8, -1};
    config.init_seed = 33;
    return config;
}

SceneDataset micro_dataset() {
    SynthConfig config;
    config.n_views = 3;
    config.resolution = 12;
    config.quadrature_samples = 128;
    config.point_cloud_size = 300;
    static SceneDataset cached =
        generate_synthetic(config, std::string(kTmpRoot) + "/data");
    return cached;
}

TrainSchedule micro_schedule() {
    TrainSchedule s;
    s.init_iters = 3;
    s.main_iters = 6;
    s.finetune_iters = 3;
    s.batch_rays = 16;
    return s;
}

TrainOptions micro_options(const std::string& out) {
    TrainOptions o;
    o.seed = 7;
    o.n_samples = 8;
    o.checkpoint_every = 4;
    o.cloud_min = 100;
    o.cloud_max = 400;
    o.n_uv_samples = 64;
    o.out_dir = out;
    return o;
}

std::vector<double> flat_params(const FieldSet& fields) {
    std::vector<double> out;
    for (const auto& item : fields.params().items()) {
        auto d = item.second.data();
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}
}  // namespace

TEST_CASE("phase boundaries") {
    TrainSchedule s = micro_schedule();
    CHECK(phase_of(0, s) == 1);
    CHECK(phase_of(2, s) == 1);
    CHECK(phase_of(3, s) == 2);
    CHECK(phase_of(8, s) == 2);
    CHECK(phase_of(9, s) == 3);
    CHECK(phase_of(11, s) == 3);
}

TEST_CASE("checkpoint round trip is bit exact") {
    std::filesystem::create_directories(kTmpRoot);
    FieldSet fields(tiny_config());
    Adam adam(AdamConfig{.lr = 3e-3});
    // populate optimizer slots with one real step
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor x = Tensor::from_vector({2, 3}, {0.1, 0.2, 0.3, -0.1, 0.0, 0.2});
        tape.backward(sum(fields.eval_density(x)));
    }
    std::vector<std::pair<std::string, Tensor>> all;
    for (const auto& item : fields.params().items()) {
        Tensor t = item.second;  // handle copy; shares storage
        if (!t.has_grad()) t.grad();  // zero-fill untouched
        all.push_back(item);
    }
    adam.step(all);

    const std::string path = std::string(kTmpRoot) + "/ckpt.ntck";
    save_checkpoint(path, fields, adam, 41, 2);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.global_step == 41);
    CHECK(back.phase == 2);
    CHECK(back.field_config.density.width == 8);
    CHECK(back.adam_step == 1);
    CHECK(back.adam_config.lr == 3e-3);

    const auto& a = fields.params().items();
    const auto& b = back.fields->params().items();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        auto da = a[i].second.data();
        auto db = b[i].second.data();
        REQUIRE(da.size() == db.size());
        for (size_t k = 0; k < da.size(); ++k) CHECK(da[k] == db[k]);
    }
    for (const auto& [name, slot] : back.adam_slots) {
        CHECK(slot.m.size() == slot.v.size());
    }

    // restored optimizer continues identically to the original
    Adam resumed(back.adam_config);
    restore_optimizer(resumed, back);
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor x = Tensor::from_vector({1, 3}, {0.2, -0.3, 0.1});
        tape.backward(sum(fields.eval_density(x)));
    }
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor x = Tensor::from_vector({1, 3}, {0.2, -0.3, 0.1});
        tape.backward(sum(back.fields->eval_density(x)));
    }
    std::vector<std::pair<std::string, Tensor>> pa, pb;
    for (const auto& item : fields.params().items()) {
        Tensor t = item.second;
        if (!t.has_grad()) t.grad();
        pa.push_back(item);
    }
    for (const auto& item : back.fields->params().items()) {
        Tensor t = item.second;
        if (!t.has_grad()) t.grad();
        pb.push_back(item);
    }
    adam.step(pa);
    resumed.step(pb);
    std::vector<double> fa = flat_params(fields);
    std::vector<double> fb = flat_params(*back.fields);
    for (size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
}

TEST_CASE("checkpoint loader rejects corruption") {
    const std::string path = std::string(kTmpRoot) + "/bad.ntck";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTACKPT00000000";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint(std::string(kTmpRoot) + "/missing.ntck"),
                    std::runtime_error);
}

TEST_CASE("micro training runs all phases and logs") {
    SceneDataset dataset = micro_dataset();
    FieldSet fields(tiny_config());
    const std::string out = std::string(kTmpRoot) + "/run";
    std::filesystem::remove_all(out);
    TrainResult result = train(dataset, fields, micro_schedule(), LossWeights{},
                               micro_options(out));
    CHECK(result.final_step == 12);
    CHECK_FALSE(result.aborted_nan);
    CHECK(std::filesystem::exists(out + "/checkpoints/phase1_end.ntck"));
    CHECK(std::filesystem::exists(out + "/checkpoints/phase2_end.ntck"));
    CHECK(std::filesystem::exists(result.last_checkpoint));
    CHECK(result.phase2_end_checkpoint == out + "/checkpoints/phase2_end.ntck");

    // loss log: header plus one row per iteration
    std::ifstream log(out + "/loss_log.csv");
    REQUIRE(log.good());
    std::string line;
    std::getline(log, line);
    CHECK(line.find("iteration") != std::string::npos);
    CHECK(line.find("phase") != std::string::npos);
    long rows = 0;
    while (std::getline(log, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 12);
}

TEST_CASE("training is deterministic across worker counts") {
    SceneDataset dataset = micro_dataset();
    FieldSet a(tiny_config());
    FieldSet b(tiny_config());
    TrainOptions oa = micro_options(std::string(kTmpRoot) + "/det1");
    TrainOptions ob = micro_options(std::string(kTmpRoot) + "/det8");
    std::filesystem::remove_all(oa.out_dir);
    std::filesystem::remove_all(ob.out_dir);
    oa.threads = 1;
    ob.threads = 8;
    train(dataset, a, micro_schedule(), LossWeights{}, oa);
    train(dataset, b, micro_schedule(), LossWeights{}, ob);
    std::vector<double> fa = flat_params(a);
    std::vector<double> fb = flat_params(b);
    REQUIRE(fa.size() == fb.size());
    for (size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
}

TEST_CASE("fine-tune phase only moves texture parameters") {
    SceneDataset dataset = micro_dataset();
    FieldSet fields(tiny_config());
    TrainSchedule s = micro_schedule();
    s.init_iters = 0;
    s.main_iters = 0;
    s.finetune_iters = 4;
    TrainOptions options = micro_options(std::string(kTmpRoot) + "/freeze");
    std::filesystem::remove_all(options.out_dir);
    FieldSet before = fields.clone();
    train(dataset, fields, s, LossWeights{}, options);
    bool texture_moved = false;
    const auto& pa = before.params().items();
    const auto& pb = fields.params().items();
    for (size_t i = 0; i < pa.size(); ++i) {
        auto da = pa[i].second.data();
        auto db = pb[i].second.data();
        if (FieldSet::is_texture_param(pa[i].first)) {
            for (size_t k = 0; k < da.size(); ++k) {
                if (da[k] != db[k]) texture_moved = true;
            }
        } else {
            // frozen: bit identical
            for (size_t k = 0; k < da.size(); ++k) CHECK(da[k] == db[k]);
        }
    }
    CHECK(texture_moved);
}

TEST_CASE("resume reproduces the uninterrupted run bit for bit") {
    SceneDataset dataset = micro_dataset();
    TrainSchedule s = micro_schedule();
    TrainOptions full_opts = micro_options(std::string(kTmpRoot) + "/full");
    std::filesystem::remove_all(full_opts.out_dir);
    FieldSet full(tiny_config());
    train(dataset, full, s, LossWeights{}, full_opts);

    // stop after 8 iterations (checkpoint_every 4), resume to the end
    TrainSchedule first = s;
    first.main_iters = 5;  // 3 + 5 = 8 iterations
    first.finetune_iters = 0;
    TrainOptions part_opts = micro_options(std::string(kTmpRoot) + "/part");
    std::filesystem::remove_all(part_opts.out_dir);
    FieldSet part(tiny_config());
    TrainResult half = train(dataset, part, first, LossWeights{}, part_opts);
    CHECK(half.final_step == 8);

    TrainOptions resume_opts = micro_options(std::string(kTmpRoot) + "/resumed");
    std::filesystem::remove_all(resume_opts.out_dir);
    resume_opts.resume = half.last_checkpoint;
    FieldSet resumed(tiny_config());
    train(dataset, resumed, s, LossWeights{}, resume_opts);

    std::vector<double> fa = flat_params(full);
    std::vector<double> fb = flat_params(resumed);
    REQUIRE(fa.size() == fb.size());
    for (size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
}

TEST_CASE("non-finite losses abort with a diagnostic dump") {
    SceneDataset dataset = micro_dataset();
    FieldSet fields(tiny_config());
    // poison the density output bias so every forward pass produces NaN
    // (hidden-layer values could be masked by a dead relu)
    for (const auto& item : fields.params().items()) {
        if (item.first.rfind("density.", 0) == 0 &&
            item.first.find("bias") != std::string::npos) {
            Tensor t = item.second;
            t.data()[0] = std::nan("");
        }
    }
    TrainSchedule s = micro_schedule();
    s.init_iters = 0;
    TrainOptions options = micro_options(std::string(kTmpRoot) + "/nan");
    std::filesystem::remove_all(options.out_dir);
    TrainResult result = train(dataset, fields, s, LossWeights{}, options);
    CHECK(result.aborted_nan);
    CHECK(std::filesystem::exists(options.out_dir + "/nan_dump.json"));
}
