#include "sseg/runconfig.hpp"

#include <stdexcept>

#include "json.hpp"
#include "sseg/dataset.hpp"

namespace sseg {

namespace {
using nlohmann::json;
}

RunConfig RunConfig::preset(const std::string& profile, Variant variant) {
    RunConfig cfg;
    cfg.profile = profile;
    cfg.network.variant = variant;
    const bool lowres = (variant == Variant::lowres || variant == Variant::lowres_tl);
    if (variant == Variant::lowres_tl) cfg.network.schema_id = "tl";
    cfg.gen.schema_id = cfg.network.schema_id;

    if (profile == "desk") {
        cfg.network.base_width = 8;
        cfg.network.lowres_h = 256;
        cfg.network.lowres_w = 112;
        if (lowres) {
            cfg.strip = StripConfig{112, 256, 256, 0};
        } else if (variant == Variant::noprior) {
            cfg.strip = StripConfig{208, 528, 176, 0};
        } else {
            cfg.strip = StripConfig{208, 464, 176, 80};
        }
        cfg.gen.canvas_w = 208;
        cfg.gen.canvas_h = 464;
        cfg.gen.span_pitch = 96;
        cfg.gen.border_width = 2;
        cfg.train.batch_strips = 4;
    } else if (profile == "paper") {
        cfg.network.base_width = 64;
        cfg.network.lowres_h = 792;
        cfg.network.lowres_w = 792;
        if (lowres) {
            cfg.strip = StripConfig{792, 792, 792, 0};
        } else if (variant == Variant::noprior) {
            cfg.strip = StripConfig{1000, 1800, 600, 0};
        } else {
            cfg.strip = StripConfig{1000, 1800, 600, 200};
        }
        cfg.gen = GenParams{}.scaled(1000.0 / 208.0);
        cfg.gen.canvas_w = 1000;
        cfg.gen.canvas_h = 1800;
        cfg.gen.span_pitch = 400;
        cfg.gen.border_width = 4;
        cfg.gen.schema_id = cfg.network.schema_id;
        cfg.train.batch_strips = 32;
    } else {
        throw std::invalid_argument("unknown profile '" + profile + "' (desk|paper)");
    }
    return cfg;
}

void RunConfig::validate() const {
    strip.validate();
    network.validate();
    gen.validate();
    if (train.batch_strips < 1 || train.steps < 0) {
        throw std::invalid_argument("config: train.batch_strips must be >= 1 and steps >= 0");
    }
    if (network.schema_id != gen.schema_id) {
        throw std::invalid_argument("config: network schema '" + network.schema_id +
                                    "' differs from generator schema '" + gen.schema_id + "'");
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["profile"] = profile;
    j["seed"] = seed;
    j["strip"] = {{"w", strip.w}, {"h", strip.h}, {"strip_h", strip.strip_h},
                  {"overlap_h", strip.overlap_h}};
    j["network"] = {{"variant", variant_name(network.variant)},
                    {"base_width", network.base_width},
                    {"desk_scale", network.desk_scale},
                    {"dilation_rates", network.dilation_rates},
                    {"num_bdb", network.num_bdb},
                    {"schema", network.schema_id},
                    {"lowres_h", network.lowres_h},
                    {"lowres_w", network.lowres_w}};
    j["train"] = {{"batch_strips", train.batch_strips},
                  {"steps", train.steps},
                  {"rho", train.rho},
                  {"epsilon", train.epsilon},
                  {"lr", train.lr},
                  {"decay_factor", train.decay_factor},
                  {"decay_interval", train.decay_interval},
                  {"teacher_prior", train.teacher_prior}};
    j["gen"] = json::parse(gen_params_to_json(gen));
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig cfg;
    cfg.profile = j.value("profile", cfg.profile);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("strip")) {
        const auto& js = j.at("strip");
        cfg.strip.w = js.value("w", cfg.strip.w);
        cfg.strip.h = js.value("h", cfg.strip.h);
        cfg.strip.strip_h = js.value("strip_h", cfg.strip.strip_h);
        cfg.strip.overlap_h = js.value("overlap_h", cfg.strip.overlap_h);
    }
    if (j.contains("network")) {
        const auto& jn = j.at("network");
        cfg.network.variant = variant_by_name(jn.value("variant", std::string("highres")));
        cfg.network.base_width = jn.value("base_width", cfg.network.base_width);
        cfg.network.desk_scale = jn.value("desk_scale", cfg.network.desk_scale);
        if (jn.contains("dilation_rates")) {
            const auto rates = jn.at("dilation_rates").get<std::vector<int>>();
            if (rates.size() != 4) throw std::invalid_argument("config: need 4 dilation rates");
            std::copy(rates.begin(), rates.end(), cfg.network.dilation_rates.begin());
        }
        cfg.network.num_bdb = jn.value("num_bdb", cfg.network.num_bdb);
        cfg.network.schema_id = jn.value("schema", cfg.network.schema_id);
        cfg.network.lowres_h = jn.value("lowres_h", cfg.network.lowres_h);
        cfg.network.lowres_w = jn.value("lowres_w", cfg.network.lowres_w);
    }
    if (j.contains("train")) {
        const auto& jt = j.at("train");
        cfg.train.batch_strips = jt.value("batch_strips", cfg.train.batch_strips);
        cfg.train.steps = jt.value("steps", cfg.train.steps);
        cfg.train.rho = jt.value("rho", cfg.train.rho);
        cfg.train.epsilon = jt.value("epsilon", cfg.train.epsilon);
        cfg.train.lr = jt.value("lr", cfg.train.lr);
        cfg.train.decay_factor = jt.value("decay_factor", cfg.train.decay_factor);
        cfg.train.decay_interval = jt.value("decay_interval", cfg.train.decay_interval);
        cfg.train.teacher_prior = jt.value("teacher_prior", cfg.train.teacher_prior);
    }
    if (j.contains("gen")) {
        cfg.gen = gen_params_from_json(j.at("gen").dump());
    }
    return cfg;
}

}  // namespace sseg
