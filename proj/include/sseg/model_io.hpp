#pragma once

#include "sseg/checkpoint.hpp"
#include "sseg/network.hpp"
#include "sseg/runconfig.hpp"

namespace sseg {

// Parameters are stored as float32 regardless of the compute type.
template <typename T>
Checkpoint checkpoint_from_net(SegNet<T>& net, const std::string& config_json) {
    Checkpoint ckpt;
    ckpt.config_json = config_json;
    for (auto& np : net.named_params()) {
        CheckpointRecord r;
        r.name = np.name;
        for (int d : np.tensor->shape) r.dims.push_back(static_cast<std::uint32_t>(d));
        r.values.reserve(np.tensor->values.size());
        for (const T v : np.tensor->values) r.values.push_back(static_cast<float>(v));
        ckpt.records.push_back(std::move(r));
    }
    return ckpt;
}

template <typename T>
void load_net_params(SegNet<T>& net, const Checkpoint& ckpt) {
    for (auto& np : net.named_params()) {
        const CheckpointRecord* r = ckpt.find(np.name);
        if (!r) throw std::runtime_error("checkpoint is missing parameter '" + np.name + "'");
        if (r->values.size() != np.tensor->values.size()) {
            throw std::runtime_error("checkpoint parameter '" + np.name + "' has " +
                                     std::to_string(r->values.size()) + " values, expected " +
                                     std::to_string(np.tensor->values.size()));
        }
        for (std::size_t i = 0; i < r->values.size(); ++i) {
            np.tensor->values[i] = static_cast<T>(r->values[i]);
        }
    }
}

template <typename T>
void save_model(const std::string& path, SegNet<T>& net, const RunConfig& cfg) {
    write_checkpoint(path, checkpoint_from_net(net, cfg.to_json()));
}

// Rebuilds the network from the config blob embedded in the checkpoint.
template <typename T>
std::pair<SegNet<T>, RunConfig> load_model(const std::string& path, bool trainable = false) {
    const Checkpoint ckpt = read_checkpoint(path);
    RunConfig cfg = RunConfig::from_json(ckpt.config_json);
    SegNet<T> net = SegNet<T>::build(cfg.network, cfg.seed, trainable);
    load_net_params(net, ckpt);
    return {std::move(net), std::move(cfg)};
}

}  // namespace sseg
