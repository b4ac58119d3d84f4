#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sseg {

// On-disk checkpoint. Little-endian throughout:
//   magic "SSEG"
//   u32 format version (1)
//   u32 config blob length, then that many bytes (json)
//   repeated until EOF: { u32 name length, name bytes, u32 rank,
//                         u32 dims[rank], f32 values[prod(dims)] }
struct CheckpointRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

struct Checkpoint {
    std::string config_json;
    std::vector<CheckpointRecord> records;

    const CheckpointRecord* find(const std::string& name) const {
        for (const auto& r : records) {
            if (r.name == name) return &r;
        }
        return nullptr;
    }
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace sseg
