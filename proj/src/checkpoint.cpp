#include "sseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sseg {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");
static_assert(sizeof(float) == 4);

void put_u32(std::ostream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& f, const std::string& path) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (f.gcount() != 4) throw std::runtime_error("checkpoint truncated: " + path);
    return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    f.write("SSEG", 4);
    put_u32(f, 1);
    put_u32(f, static_cast<std::uint32_t>(ckpt.config_json.size()));
    f.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
    for (const auto& r : ckpt.records) {
        put_u32(f, static_cast<std::uint32_t>(r.name.size()));
        f.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put_u32(f, static_cast<std::uint32_t>(r.dims.size()));
        std::uint64_t numel = 1;
        for (std::uint32_t d : r.dims) {
            put_u32(f, d);
            numel *= d;
        }
        if (numel != r.values.size()) {
            throw std::runtime_error("checkpoint record '" + r.name + "' dims/value mismatch");
        }
        f.write(reinterpret_cast<const char*>(r.values.data()),
                static_cast<std::streamsize>(r.values.size() * 4));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);

    char magic[4];
    f.read(magic, 4);
    if (f.gcount() != 4 || std::memcmp(magic, "SSEG", 4) != 0) {
        throw std::runtime_error("not a checkpoint (bad magic): " + path);
    }
    const std::uint32_t version = get_u32(f, path);
    if (version != 1) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                                 " in " + path);
    }

    Checkpoint ckpt;
    const std::uint32_t blob_len = get_u32(f, path);
    ckpt.config_json.resize(blob_len);
    f.read(ckpt.config_json.data(), blob_len);
    if (static_cast<std::uint32_t>(f.gcount()) != blob_len) {
        throw std::runtime_error("checkpoint truncated: " + path);
    }

    while (true) {
        std::uint32_t name_len = 0;
        f.read(reinterpret_cast<char*>(&name_len), 4);
        if (f.gcount() == 0) break;  // clean EOF between records
        if (f.gcount() != 4) throw std::runtime_error("checkpoint truncated: " + path);

        CheckpointRecord r;
        r.name.resize(name_len);
        f.read(r.name.data(), name_len);
        if (static_cast<std::uint32_t>(f.gcount()) != name_len) {
            throw std::runtime_error("checkpoint truncated: " + path);
        }
        const std::uint32_t rank = get_u32(f, path);
        if (rank > 4) throw std::runtime_error("checkpoint record rank > 4: " + path);
        std::uint64_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            r.dims.push_back(get_u32(f, path));
            numel *= r.dims.back();
        }
        r.values.resize(numel);
        f.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(numel * 4));
        if (static_cast<std::uint64_t>(f.gcount()) != numel * 4) {
            throw std::runtime_error("checkpoint truncated: " + path);
        }
        ckpt.records.push_back(std::move(r));
    }
    return ckpt;
}

}  // namespace sseg
