// SPDX-License-Identifier: Apache-2.0

#include "neutex/config.hpp"

#include <fstream>

namespace neutex {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

void read_mlp(const nlohmann::json& j, const char* key, MlpSpec& spec) {
    if (!j.contains(key)) return;
    const nlohmann::json& m = j.at(key);
    reject_unknown(m, {"depth", "width", "skip"}, std::string("fields.") + key);
    read(m, "depth", spec.depth);
    read(m, "width", spec.width);
    read(m, "skip", spec.skip);
}

}  // namespace

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    c.preset = name;
    if (name == "paper") {
        // architectures at full scale; FieldConfig defaults already match
        c.schedule = {50000, 500000, 20000, 600, 2.0 / 3.0};
        c.train.n_samples = 256;
        c.train.checkpoint_every = 10000;
        c.train.early_stop = true;
        c.render_samples = 256;
    } else if (name == "desk") {
        c.fields.enc = {4, 4, 2};
        c.fields.density = {3, 32, -1};
        c.fields.uv = {3, 24, -1};
        c.fields.uv_inv = {3, 24, -1};
        c.fields.texture = {3, 32, -1};
        c.schedule = {2000, 20000, 2000, 512, 2.0 / 3.0};
        c.train.n_samples = 64;
        c.train.checkpoint_every = 2000;
        c.train.early_stop = false;
        c.render_samples = 64;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
    }
    return c;
}

void apply_config_json(RunConfig& config, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    if (j.contains("preset")) {
        const std::string name = j.at("preset").get<std::string>();
        RunConfig base = preset_config(name);
        base.dataset = config.dataset;
        base.out = config.out;
        base.seed = config.seed;
        base.threads = config.threads;
        config = base;
    }
    reject_unknown(j,
                   {"preset", "dataset", "out", "seed", "threads", "fields", "weights",
                    "schedule", "train", "render_samples"},
                   "config");
    read(j, "dataset", config.dataset);
    read(j, "out", config.out);
    read(j, "seed", config.seed);
    read(j, "threads", config.threads);
    read(j, "render_samples", config.render_samples);
    if (j.contains("fields")) {
        const nlohmann::json& f = j.at("fields");
        reject_unknown(f,
                       {"k_position", "k_uv", "k_view", "density", "uv", "uv_inv", "texture",
                        "uv_topology", "init_seed"},
                       "fields");
        read(f, "k_position", config.fields.enc.k_position);
        read(f, "k_uv", config.fields.enc.k_uv);
        read(f, "k_view", config.fields.enc.k_view);
        read_mlp(f, "density", config.fields.density);
        read_mlp(f, "uv", config.fields.uv);
        read_mlp(f, "uv_inv", config.fields.uv_inv);
        read_mlp(f, "texture", config.fields.texture);
        read(f, "uv_topology", config.fields.uv_topology);
        read(f, "init_seed", config.fields.init_seed);
    }
    if (j.contains("weights")) {
        const nlohmann::json& w = j.at("weights");
        reject_unknown(w, {"a1", "a2", "init_a", "init_b", "init_c"}, "weights");
        read(w, "a1", config.weights.a1);
        read(w, "a2", config.weights.a2);
        read(w, "init_a", config.weights.init_a);
        read(w, "init_b", config.weights.init_b);
        read(w, "init_c", config.weights.init_c);
    }
    if (j.contains("schedule")) {
        const nlohmann::json& s = j.at("schedule");
        reject_unknown(
            s, {"init_iters", "main_iters", "finetune_iters", "batch_rays", "foreground_fraction"},
            "schedule");
        read(s, "init_iters", config.schedule.init_iters);
        read(s, "main_iters", config.schedule.main_iters);
        read(s, "finetune_iters", config.schedule.finetune_iters);
        read(s, "batch_rays", config.schedule.batch_rays);
        read(s, "foreground_fraction", config.schedule.foreground_fraction);
    }
    if (j.contains("train")) {
        const nlohmann::json& t = j.at("train");
        reject_unknown(t,
                       {"n_samples", "checkpoint_every", "use_init_pointcloud",
                        "detach_cycle_weights", "mask_post_absorption", "train_uv_inv",
                        "early_stop", "lr", "cloud_min", "cloud_max", "n_uv_samples",
                        "heldout"},
                       "train");
        read(t, "n_samples", config.train.n_samples);
        read(t, "checkpoint_every", config.train.checkpoint_every);
        read(t, "use_init_pointcloud", config.train.use_init_pointcloud);
        read(t, "detach_cycle_weights", config.train.detach_cycle_weights);
        read(t, "mask_post_absorption", config.train.mask_post_absorption);
        read(t, "train_uv_inv", config.train.train_uv_inv);
        read(t, "early_stop", config.train.early_stop);
        read(t, "lr", config.train.adam.lr);
        read(t, "cloud_min", config.train.cloud_min);
        read(t, "cloud_max", config.train.cloud_max);
        read(t, "n_uv_samples", config.train.n_uv_samples);
        if (t.contains("heldout")) {
            if (!t.at("heldout").is_array()) {
                throw ConfigError("train.heldout must be an array of view indices");
            }
            config.train.heldout = t.at("heldout").get<std::vector<int>>();
        }
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    RunConfig config = j.contains("preset")
                           ? preset_config(j.at("preset").get<std::string>())
                           : preset_config("desk");
    apply_config_json(config, j);
    return config;
}

void validate_config(const RunConfig& config) {
    if (config.schedule.batch_rays <= 0) throw ConfigError("schedule.batch_rays must be > 0");
    if (config.schedule.foreground_fraction < 0.0 || config.schedule.foreground_fraction > 1.0) {
        throw ConfigError("schedule.foreground_fraction outside [0,1]");
    }
    if (config.schedule.init_iters < 0 || config.schedule.main_iters < 0 ||
        config.schedule.finetune_iters < 0) {
        throw ConfigError("schedule iteration counts must be >= 0");
    }
    if (config.train.n_samples < 2) throw ConfigError("train.n_samples must be >= 2");
    if (config.render_samples < 2) throw ConfigError("render_samples must be >= 2");
    if (config.threads < 1) throw ConfigError("threads must be >= 1");
    for (const MlpSpec* spec : {&config.fields.density, &config.fields.uv,
                                &config.fields.uv_inv, &config.fields.texture}) {
        if (spec->depth < 1 || spec->width < 1) {
            throw ConfigError("network depth and width must be >= 1");
        }
    }
    if (config.fields.enc.k_position < 0 || config.fields.enc.k_uv < 0 ||
        config.fields.enc.k_view < 0) {
        throw ConfigError("encoding frequency counts must be >= 0");
    }
    const LossWeights& w = config.weights;
    if (w.a1 < 0 || w.a2 < 0 || w.init_a < 0 || w.init_b < 0 || w.init_c < 0) {
        throw ConfigError("loss weights must be >= 0");
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["dataset"] = dataset;
    j["out"] = out;
    j["seed"] = seed;
    j["threads"] = threads;
    j["render_samples"] = render_samples;
    j["fields"] = {
        {"k_position", fields.enc.k_position},
        {"k_uv", fields.enc.k_uv},
        {"k_view", fields.enc.k_view},
        {"density", {{"depth", fields.density.depth}, {"width", fields.density.width}, {"skip", fields.density.skip}}},
        {"uv", {{"depth", fields.uv.depth}, {"width", fields.uv.width}, {"skip", fields.uv.skip}}},
        {"uv_inv", {{"depth", fields.uv_inv.depth}, {"width", fields.uv_inv.width}, {"skip", fields.uv_inv.skip}}},
        {"texture", {{"depth", fields.texture.depth}, {"width", fields.texture.width}, {"skip", fields.texture.skip}}},
        {"uv_topology", fields.uv_topology},
        {"init_seed", fields.init_seed},
    };
    j["weights"] = {{"a1", weights.a1},
                    {"a2", weights.a2},
                    {"init_a", weights.init_a},
                    {"init_b", weights.init_b},
                    {"init_c", weights.init_c}};
    j["schedule"] = {{"init_iters", schedule.init_iters},
                     {"main_iters", schedule.main_iters},
                     {"finetune_iters", schedule.finetune_iters},
                     {"batch_rays", schedule.batch_rays},
                     {"foreground_fraction", schedule.foreground_fraction}};
    j["train"] = {{"n_samples", train.n_samples},
                  {"checkpoint_every", train.checkpoint_every},
                  {"use_init_pointcloud", train.use_init_pointcloud},
                  {"detach_cycle_weights", train.detach_cycle_weights},
                  {"mask_post_absorption", train.mask_post_absorption},
                  {"train_uv_inv", train.train_uv_inv},
                  {"early_stop", train.early_stop},
                  {"lr", train.adam.lr},
                  {"cloud_min", train.cloud_min},
                  {"cloud_max", train.cloud_max},
                  {"n_uv_samples", train.n_uv_samples},
                  {"heldout", train.heldout}};
    return j;
}

}  // namespace neutex
