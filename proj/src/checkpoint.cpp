// SPDX-License-Identifier: Apache-2.0

#include "neutex/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace neutex {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob layout assumes a little-endian host");

namespace {

void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const FieldSet& fields,
                     const Adam& optimizer, int64_t global_step, int phase) {
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["global_step"] = global_step;
    manifest["phase"] = phase;
    manifest["field_config"] = field_config_to_json(fields.config());

    std::vector<double> blob;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& [name, tensor] : fields.params().items()) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = tensor.shape();
        entry["offset"] = blob.size();
        params.push_back(entry);
        blob.insert(blob.end(), tensor.data().begin(), tensor.data().end());
    }
    manifest["params"] = params;

    const AdamConfig& ac = optimizer.config();
    nlohmann::json adam;
    adam["lr"] = ac.lr;
    adam["beta1"] = ac.beta1;
    adam["beta2"] = ac.beta2;
    adam["eps"] = ac.eps;
    adam["step"] = optimizer.step_count();
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& [name, slot] : optimizer.slots()) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["count"] = slot.m.size();
        entry["m_offset"] = blob.size();
        blob.insert(blob.end(), slot.m.begin(), slot.m.end());
        entry["v_offset"] = blob.size();
        blob.insert(blob.end(), slot.v.begin(), slot.v.end());
        slots.push_back(entry);
    }
    adam["slots"] = slots;
    manifest["adam"] = adam;

    std::string manifest_str = manifest.dump();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u64(os, manifest_str.size());
    os.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    os.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    }
    const uint64_t manifest_len = read_u64(is);
    std::string manifest_str(manifest_len, '\0');
    is.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
    if (!is) throw std::runtime_error("truncated checkpoint manifest: " + path);
    nlohmann::json manifest = nlohmann::json::parse(manifest_str);
    if (manifest.at("version").get<int>() != 1) {
        throw std::runtime_error("unsupported checkpoint version in " + path);
    }

    std::vector<double> blob;
    {
        std::vector<char> raw((std::istreambuf_iterator<char>(is)),
                              std::istreambuf_iterator<char>());
        if (raw.size() % sizeof(double) != 0) {
            throw std::runtime_error("corrupt checkpoint blob: " + path);
        }
        blob.resize(raw.size() / sizeof(double));
        std::memcpy(blob.data(), raw.data(), raw.size());
    }

    Checkpoint ckpt;
    ckpt.field_config = field_config_from_json(manifest.at("field_config"));
    ckpt.global_step = manifest.at("global_step").get<int64_t>();
    ckpt.phase = manifest.at("phase").get<int>();
    ckpt.fields = std::make_unique<FieldSet>(ckpt.field_config);
    for (const auto& entry : manifest.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        Tensor& param = ckpt.fields->params().at(name);
        Shape shape = entry.at("shape").get<Shape>();
        if (shape != param.shape()) {
            throw std::runtime_error("checkpoint shape mismatch for parameter " + name);
        }
        const size_t offset = entry.at("offset").get<size_t>();
        if (offset + static_cast<size_t>(param.numel()) > blob.size()) {
            throw std::runtime_error("checkpoint blob out of range for " + name);
        }
        std::copy_n(blob.data() + offset, param.numel(), param.data().begin());
    }

    const auto& adam = manifest.at("adam");
    ckpt.adam_config.lr = adam.at("lr").get<double>();
    ckpt.adam_config.beta1 = adam.at("beta1").get<double>();
    ckpt.adam_config.beta2 = adam.at("beta2").get<double>();
    ckpt.adam_config.eps = adam.at("eps").get<double>();
    ckpt.adam_step = adam.at("step").get<int64_t>();
    for (const auto& entry : adam.at("slots")) {
        const std::string name = entry.at("name").get<std::string>();
        const size_t count = entry.at("count").get<size_t>();
        Adam::Slot slot;
        const size_t mo = entry.at("m_offset").get<size_t>();
        const size_t vo = entry.at("v_offset").get<size_t>();
        if (mo + count > blob.size() || vo + count > blob.size()) {
            throw std::runtime_error("checkpoint blob out of range for optimizer slot " + name);
        }
        slot.m.assign(blob.begin() + static_cast<long>(mo), blob.begin() + static_cast<long>(mo + count));
        slot.v.assign(blob.begin() + static_cast<long>(vo), blob.begin() + static_cast<long>(vo + count));
        ckpt.adam_slots[name] = std::move(slot);
    }
    return ckpt;
}

void restore_optimizer(Adam& optimizer, const Checkpoint& ckpt) {
    optimizer.set_step_count(ckpt.adam_step);
    optimizer.slots() = ckpt.adam_slots;
}

}  // namespace neutex
