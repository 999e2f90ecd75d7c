// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lsr/error.hpp"
#include "lsr/network.hpp"

namespace lsr {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Full:
            return "full";
        case Variant::Small:
            return "small";
        case Variant::Custom:
            return "custom";
    }
    return "?";
}

Variant parse_variant(const std::string& text) {
    if (text == "full") {
        return Variant::Full;
    }
    if (text == "small" || text == "s") {
        return Variant::Small;
    }
    if (text == "custom") {
        return Variant::Custom;
    }
    throw ConfigError("unknown variant '" + text + "' (expected full, small or custom)");
}

ModelConfig ModelConfig::full(int scale) {
    ModelConfig cfg;
    cfg.scale = scale;
    return cfg;
}

ModelConfig ModelConfig::small(int scale) {
    ModelConfig cfg;
    cfg.scale = scale;
    cfg.variant = Variant::Small;
    cfg.arch = RduArch::SCB;
    cfg.latent = 8;
    cfg.ddf = false;
    return cfg;
}

void ModelConfig::validate() const {
    if (scale < 2 || scale > 4) {
        throw ConfigError("scale must be 2, 3 or 4, got " + std::to_string(scale));
    }
    if (channels < 4) {
        throw ConfigError("channels must be at least 4, got " + std::to_string(channels));
    }
    if (blocks < 1) {
        throw ConfigError("blocks must be at least 1");
    }
    if (latent < 0 || latent > channels / 2) {
        throw ConfigError("latent must lie in [0, channels/2], got " + std::to_string(latent));
    }
    if (experts < 1) {
        throw ConfigError("experts must be at least 1");
    }
    if (distilled_channels < 0) {
        throw ConfigError("distilled_channels must be non-negative");
    }
    if (effective_distilled() < 1) {
        throw ConfigError("distilled channel count resolves to zero");
    }
    if (!std::isfinite(slope) || slope < 0.0) {
        throw ConfigError("slope must be a finite non-negative number");
    }
    if (variant == Variant::Full && (arch != RduArch::Base || !ddf)) {
        throw ConfigError("variant full requires arch base with dynamic fusion enabled");
    }
    if (variant == Variant::Small && (arch != RduArch::SCB || ddf)) {
        throw ConfigError("variant small requires arch scb with dynamic fusion disabled");
    }
}

RduConfig ModelConfig::rdu() const {
    RduConfig r;
    r.arch = arch;
    r.channels = channels;
    r.latent = latent;
    r.rep_style = rep_style;
    r.conv_type = conv_type;
    r.experts = experts;
    r.slope = slope;
    return r;
}

RepDfdbConfig ModelConfig::block() const {
    RepDfdbConfig b;
    b.rdu = rdu();
    b.distilled_channels = effective_distilled();
    b.ddf = ddf;
    return b;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["scale"] = cfg.scale;
    j["channels"] = cfg.channels;
    j["blocks"] = cfg.blocks;
    j["latent"] = cfg.latent;
    j["variant"] = to_string(cfg.variant);
    j["arch"] = to_string(cfg.arch);
    j["rep_style"] = to_string(cfg.rep_style);
    j["conv_type"] = to_string(cfg.conv_type);
    j["experts"] = cfg.experts;
    j["distilled_channels"] = cfg.distilled_channels;
    j["slope"] = cfg.slope;
    j["ddf"] = cfg.ddf;
    return j.dump(2);
}

namespace {

template <typename V>
V get_field(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

ModelConfig model_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    static const std::set<std::string> known = {"scale",     "channels",  "blocks",  "latent",
                                                "variant",   "arch",      "rep_style", "conv_type",
                                                "experts",   "distilled_channels", "slope", "ddf"};
    for (const auto& item : j.items()) {
        if (known.count(item.key()) == 0) {
            throw ConfigError("unknown config key '" + item.key() + "'");
        }
    }
    const int scale = j.contains("scale") ? get_field<int>(j, "scale") : 4;
    const Variant variant = j.contains("variant") ? parse_variant(get_field<std::string>(j, "variant")) : Variant::Full;
    ModelConfig cfg = variant == Variant::Small ? ModelConfig::small(scale) : ModelConfig::full(scale);
    cfg.variant = variant;
    if (j.contains("channels")) {
        cfg.channels = get_field<int>(j, "channels");
    }
    if (j.contains("blocks")) {
        cfg.blocks = get_field<int>(j, "blocks");
    }
    if (j.contains("latent")) {
        cfg.latent = get_field<int>(j, "latent");
    }
    if (j.contains("arch")) {
        cfg.arch = parse_rdu_arch(get_field<std::string>(j, "arch"));
    }
    if (j.contains("rep_style")) {
        cfg.rep_style = parse_rep_style(get_field<std::string>(j, "rep_style"));
    }
    if (j.contains("conv_type")) {
        cfg.conv_type = parse_conv_type(get_field<std::string>(j, "conv_type"));
    }
    if (j.contains("experts")) {
        cfg.experts = get_field<int>(j, "experts");
    }
    if (j.contains("distilled_channels")) {
        cfg.distilled_channels = get_field<int>(j, "distilled_channels");
    }
    if (j.contains("slope")) {
        cfg.slope = get_field<double>(j, "slope");
    }
    if (j.contains("ddf")) {
        cfg.ddf = get_field<bool>(j, "ddf");
    }
    cfg.validate();
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config file " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return model_config_from_json(text.str());
}

}  // namespace lsr
