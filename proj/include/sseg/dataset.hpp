#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sseg/scene.hpp"

namespace sseg {

struct SampleRef {
    int idx = 0;
    std::string split;
    std::uint64_t seed = 0;
};

struct Manifest {
    std::uint64_t seed = 0;
    int count = 0;
    GenParams params;
    std::vector<SampleRef> samples;

    std::vector<const SampleRef*> split(const std::string& name) const {
        std::vector<const SampleRef*> out;
        for (const auto& s : samples) {
            if (s.split == name) out.push_back(&s);
        }
        return out;
    }
};

// Writes n samples under out_dir: {split}/{idx:06}.img.pgm, per-level
// {idx:06}.L{level}.msk.pgm, a {idx:06}.scene.jsonl record per sample and a
// manifest.json. Split boundaries: floor(0.8n) train, floor(0.1n) val,
// remainder test. Bit-identical for the same (n, seed, params).
Manifest emit_dataset(int n, std::uint64_t seed, const std::string& out_dir,
                      const GenParams& params);

Manifest read_manifest(const std::string& dir);

struct LoadedSample {
    GrayImage image;
    std::vector<LabelImage> masks;
};

LoadedSample load_sample(const std::string& dir, const SampleRef& ref, int levels);

std::vector<SceneObject> read_scene_jsonl(const std::string& path);

// Regenerates a sample in memory from its manifest seed (no disk reads).
struct MaterializedSample {
    DocumentScene scene;
    GrayImage image;
    std::vector<LabelImage> masks;
};
MaterializedSample materialize_sample(const GenParams& params, std::uint64_t sample_seed,
                                      const ClassSchema& schema);

std::string sample_stem(int idx);

// JSON round-trip for generator parameters (manifest, run configs).
std::string gen_params_to_json(const GenParams& p);
GenParams gen_params_from_json(const std::string& text);

}  // namespace sseg
