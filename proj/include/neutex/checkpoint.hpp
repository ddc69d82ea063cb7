// SPDX-License-Identifier: Apache-2.0
//
// Versioned checkpoint container: an 8-byte magic, a little-endian u64
// manifest length, a JSON manifest, then a flat blob of little-endian 64-bit
// reals. The manifest names every parameter with shape and blob offset, and
// carries the field architecture, optimizer state layout, and global step,
// so evaluation never needs the original run config.

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "neutex/fields.hpp"
#include "neutex/nn.hpp"

namespace neutex {

inline constexpr char kCheckpointMagic[8] = {'N', 'T', 'C', 'K', '0', '0', '0', '1'};

struct Checkpoint {
    FieldConfig field_config;
    std::unique_ptr<FieldSet> fields;
    AdamConfig adam_config;
    std::map<std::string, Adam::Slot> adam_slots;
    int64_t adam_step = 0;
    int64_t global_step = 0;
    int phase = 0;
};

void save_checkpoint(const std::string& path, const FieldSet& fields,
                     const Adam& optimizer, int64_t global_step, int phase);

Checkpoint load_checkpoint(const std::string& path);

// Restores optimizer bookkeeping from a loaded checkpoint.
void restore_optimizer(Adam& optimizer, const Checkpoint& ckpt);

}  // namespace neutex
