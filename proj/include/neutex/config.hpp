// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a single JSON document covering dataset location,
// network architecture, loss weights, schedule, and renderer settings.
// Presets ("paper", "desk") fill defaults; explicit keys override them; CLI
// flags override both. Unknown keys are rejected.

#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "neutex/fields.hpp"
#include "neutex/losses.hpp"
#include "neutex/train.hpp"

namespace neutex {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string preset = "desk";
    std::string dataset;
    std::string out;
    uint64_t seed = 1;
    int threads = 1;
    FieldConfig fields;
    LossWeights weights;
    TrainSchedule schedule;
    TrainOptions train;
    int render_samples = 64;

    nlohmann::json to_json() const;
};

// Preset name -> fully populated config ("paper" or "desk").
RunConfig preset_config(const std::string& name);

// Strict merge of a JSON document over `config`; throws ConfigError on
// unknown keys or malformed values. A "preset" key is applied first.
void apply_config_json(RunConfig& config, const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

// Basic sanity checks run before any compute.
void validate_config(const RunConfig& config);

}  // namespace neutex
