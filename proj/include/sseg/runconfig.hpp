#pragma once

#include <cstdint>
#include <string>

#include "sseg/network.hpp"
#include "sseg/scene.hpp"
#include "sseg/strip.hpp"

namespace sseg {

struct TrainParams {
    int batch_strips = 4;
    std::int64_t steps = 2000;
    double rho = 0.95;
    double epsilon = 1e-6;
    double lr = 0.1;
    double decay_factor = 0.1;
    std::int64_t decay_interval = 2000;
    bool teacher_prior = false;
};

// Everything a run needs, assembled from a profile preset, an optional
// config file and command-line overrides (in that order; flags win).
struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 7;
    StripConfig strip;
    NetworkConfig network;
    TrainParams train;
    GenParams gen;

    // Profile presets. The paper profile keeps the published page geometry
    // (1000x1800, strips 600/200); its strips are not multiples of the
    // encoder stride, so network runs at that scale need geometry overrides
    // while gen-data and trace-strips work as-is.
    static RunConfig preset(const std::string& profile, Variant variant);

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

}  // namespace sseg
