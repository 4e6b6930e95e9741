#include "tide/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

namespace tide::cli {

using nlohmann::json;

RunConfig::RunConfig() {
    // Defaults mirror the full TIDE setup; sample presets override per run.
    model.rope.mode = rope::InterpMode::NTKByParts;
    model.anchor.enabled = true;
    model.anchor.beta_mode = attn::BetaMode::Adaptive;
    model.temperature.mode = sched::TempMode::DynamicPerFrequency;
    analyze.resolutions = {
        {model.text_len, 16, 16},
        {model.text_len, 32, 32},
        {model.text_len, 64, 64},
    };
}

namespace {

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> known) {
    if (!j.is_object()) {
        throw ConfigError("config section " + (prefix.empty() ? "<root>" : prefix) +
                          " must be an object");
    }
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("unknown config key: " + prefix + item.key());
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) {
        j.at(key).get_to(dst);
    }
}

template <typename T, typename Map>
T parse_enum(const json& j, const std::string& key, const Map& table) {
    std::string name = j.get<std::string>();
    for (const auto& [str, value] : table) {
        if (name == str) {
            return value;
        }
    }
    throw ConfigError("invalid value '" + name + "' for " + key);
}

constexpr std::pair<const char*, rope::InterpMode> kRopeModes[] = {
    {"direct", rope::InterpMode::Direct},
    {"pi", rope::InterpMode::PI},
    {"ntk-aware", rope::InterpMode::NTKAware},
    {"ntk-by-parts", rope::InterpMode::NTKByParts},
};
constexpr std::pair<const char*, sched::TempMode> kTempModes[] = {
    {"off", sched::TempMode::Off},
    {"static-yarn", sched::TempMode::StaticYaRN},
    {"dynamic-global", sched::TempMode::DynamicGlobal},
    {"dynamic-per-frequency", sched::TempMode::DynamicPerFrequency},
};
constexpr std::pair<const char*, sched::ShiftMode> kShiftModes[] = {
    {"linear", sched::ShiftMode::LinearDefault},
    {"logarithmic", sched::ShiftMode::Logarithmic},
};
constexpr std::pair<const char*, attn::BetaMode> kBetaModes[] = {
    {"fixed", attn::BetaMode::Fixed},
    {"adaptive", attn::BetaMode::Adaptive},
};
constexpr std::pair<const char*, attn::BiasRows> kBiasRows[] = {
    {"all", attn::BiasRows::All},
    {"image-only", attn::BiasRows::ImageOnly},
};

template <typename E, std::size_t N>
const char* enum_name(const std::pair<const char*, E> (&table)[N], E value) {
    for (const auto& [str, v] : table) {
        if (v == value) {
            return str;
        }
    }
    return table[0].first;
}

// Even per-axis split of head_dim, height first.
void default_axis_split(rope::RopeSpec& spec) {
    spec.height_dims = 2 * (spec.head_dim / 4);
    spec.width_dims = spec.head_dim - spec.height_dims;
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    check_keys(j, "", {"seed", "out_dir", "model", "rope", "anchor", "temperature", "timeshift",
                       "analyze", "sample", "bench"});
    read(j, "seed", cfg.seed);
    if (j.contains("out_dir")) {
        cfg.out_dir = j.at("out_dir").get<std::string>();
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, "model.",
                   {"token_dim", "head_dim", "heads", "blocks", "mlp_hidden", "trained_h",
                    "trained_w", "text_len", "rope_on_text"});
        read(m, "token_dim", cfg.model.token_dim);
        read(m, "head_dim", cfg.model.head_dim);
        read(m, "heads", cfg.model.heads);
        read(m, "blocks", cfg.model.blocks);
        read(m, "mlp_hidden", cfg.model.mlp_hidden);
        read(m, "trained_h", cfg.model.trained_h);
        read(m, "trained_w", cfg.model.trained_w);
        read(m, "text_len", cfg.model.text_len);
        read(m, "rope_on_text", cfg.model.rope_on_text);
    }
    cfg.model.rope.head_dim = cfg.model.head_dim;
    default_axis_split(cfg.model.rope);

    if (j.contains("rope")) {
        const json& r = j.at("rope");
        check_keys(r, "rope.",
                   {"mode", "base", "scale_s", "ramp_low", "ramp_high", "height_dims",
                    "width_dims"});
        if (r.contains("mode")) {
            cfg.model.rope.mode = parse_enum<rope::InterpMode>(r.at("mode"), "rope.mode",
                                                               kRopeModes);
        }
        read(r, "base", cfg.model.rope.base);
        read(r, "scale_s", cfg.model.rope.scale_s);
        read(r, "ramp_low", cfg.model.rope.ramp_low);
        read(r, "ramp_high", cfg.model.rope.ramp_high);
        read(r, "height_dims", cfg.model.rope.height_dims);
        read(r, "width_dims", cfg.model.rope.width_dims);
    }

    if (j.contains("anchor")) {
        const json& a = j.at("anchor");
        check_keys(a, "anchor.", {"enabled", "beta_mode", "beta_fixed", "bias_rows"});
        read(a, "enabled", cfg.model.anchor.enabled);
        if (a.contains("beta_mode")) {
            cfg.model.anchor.beta_mode =
                parse_enum<attn::BetaMode>(a.at("beta_mode"), "anchor.beta_mode", kBetaModes);
        }
        read(a, "beta_fixed", cfg.model.anchor.beta_fixed);
        if (a.contains("bias_rows")) {
            cfg.model.anchor.bias_rows =
                parse_enum<attn::BiasRows>(a.at("bias_rows"), "anchor.bias_rows", kBiasRows);
        }
    }

    if (j.contains("temperature")) {
        const json& t = j.at("temperature");
        check_keys(t, "temperature.",
                   {"mode", "tau_min", "tau_max", "alpha_low", "alpha_high"});
        if (t.contains("mode")) {
            cfg.model.temperature.mode =
                parse_enum<sched::TempMode>(t.at("mode"), "temperature.mode", kTempModes);
        }
        if (t.contains("tau_min")) {
            cfg.model.tau_min_auto = false;
            read(t, "tau_min", cfg.model.temperature.tau_min);
        }
        read(t, "tau_max", cfg.model.temperature.tau_max);
        read(t, "alpha_low", cfg.model.temperature.alpha_low);
        read(t, "alpha_high", cfg.model.temperature.alpha_high);
    }

    if (j.contains("timeshift")) {
        const json& t = j.at("timeshift");
        check_keys(t, "timeshift.",
                   {"mode", "steps", "anchor_lo_tokens", "anchor_lo_mu", "anchor_hi_tokens",
                    "anchor_hi_mu"});
        if (t.contains("mode")) {
            cfg.model.timeshift.mode =
                parse_enum<sched::ShiftMode>(t.at("mode"), "timeshift.mode", kShiftModes);
        }
        read(t, "steps", cfg.model.timeshift.steps);
        read(t, "anchor_lo_tokens", cfg.model.timeshift.anchor_lo_tokens);
        read(t, "anchor_lo_mu", cfg.model.timeshift.anchor_lo_mu);
        read(t, "anchor_hi_tokens", cfg.model.timeshift.anchor_hi_tokens);
        read(t, "anchor_hi_mu", cfg.model.timeshift.anchor_hi_mu);
    }

    if (j.contains("analyze")) {
        const json& a = j.at("analyze");
        check_keys(a, "analyze.", {"synthetic", "trials", "sigma", "tau", "resolutions"});
        read(a, "synthetic", cfg.analyze.synthetic);
        read(a, "trials", cfg.analyze.trials);
        read(a, "sigma", cfg.analyze.sigma);
        read(a, "tau", cfg.analyze.tau);
        if (a.contains("resolutions")) {
            cfg.analyze.resolutions.clear();
            for (const auto& r : a.at("resolutions")) {
                if (!r.is_array() || r.size() != 2) {
                    throw ConfigError("analyze.resolutions entries must be [height, width]");
                }
                cfg.analyze.resolutions.push_back(
                    {cfg.model.text_len, r[0].get<std::size_t>(), r[1].get<std::size_t>()});
            }
        }
    }
    // Default resolutions carry the default text_len; refresh it.
    for (auto& layout : cfg.analyze.resolutions) {
        layout.text_len = cfg.model.text_len;
    }

    if (j.contains("sample")) {
        const json& s = j.at("sample");
        check_keys(s, "sample.", {"grid_h", "grid_w", "presets"});
        read(s, "grid_h", cfg.sample.grid_h);
        read(s, "grid_w", cfg.sample.grid_w);
        read(s, "presets", cfg.sample.presets);
    }

    if (j.contains("bench")) {
        const json& b = j.at("bench");
        check_keys(b, "bench.", {"sizes", "iters"});
        read(b, "sizes", cfg.bench.sizes);
        read(b, "iters", cfg.bench.iters);
    }

    cfg.model.seed = cfg.seed;
    cfg.model.validate();
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir.string();
    j["model"] = {
        {"token_dim", cfg.model.token_dim},
        {"head_dim", cfg.model.head_dim},
        {"heads", cfg.model.heads},
        {"blocks", cfg.model.blocks},
        {"mlp_hidden", cfg.model.mlp_hidden},
        {"trained_h", cfg.model.trained_h},
        {"trained_w", cfg.model.trained_w},
        {"text_len", cfg.model.text_len},
        {"rope_on_text", cfg.model.rope_on_text},
    };
    j["rope"] = {
        {"mode", enum_name(kRopeModes, cfg.model.rope.mode)},
        {"base", cfg.model.rope.base},
        {"scale_s", cfg.model.rope.scale_s},
        {"ramp_low", cfg.model.rope.ramp_low},
        {"ramp_high", cfg.model.rope.ramp_high},
        {"height_dims", cfg.model.rope.height_dims},
        {"width_dims", cfg.model.rope.width_dims},
    };
    j["anchor"] = {
        {"enabled", cfg.model.anchor.enabled},
        {"beta_mode", enum_name(kBetaModes, cfg.model.anchor.beta_mode)},
        {"beta_fixed", cfg.model.anchor.beta_fixed},
        {"bias_rows", enum_name(kBiasRows, cfg.model.anchor.bias_rows)},
    };
    j["temperature"] = {
        {"mode", enum_name(kTempModes, cfg.model.temperature.mode)},
        {"tau_max", cfg.model.temperature.tau_max},
        {"alpha_low", cfg.model.temperature.alpha_low},
        {"alpha_high", cfg.model.temperature.alpha_high},
    };
    if (!cfg.model.tau_min_auto) {
        j["temperature"]["tau_min"] = cfg.model.temperature.tau_min;
    }
    j["timeshift"] = {
        {"mode", enum_name(kShiftModes, cfg.model.timeshift.mode)},
        {"steps", cfg.model.timeshift.steps},
        {"anchor_lo_tokens", cfg.model.timeshift.anchor_lo_tokens},
        {"anchor_lo_mu", cfg.model.timeshift.anchor_lo_mu},
        {"anchor_hi_tokens", cfg.model.timeshift.anchor_hi_tokens},
        {"anchor_hi_mu", cfg.model.timeshift.anchor_hi_mu},
    };
    auto res = json::array();
    for (const auto& layout : cfg.analyze.resolutions) {
        res.push_back({layout.grid_h, layout.grid_w});
    }
    j["analyze"] = {
        {"synthetic", cfg.analyze.synthetic},
        {"trials", cfg.analyze.trials},
        {"sigma", cfg.analyze.sigma},
        {"tau", cfg.analyze.tau},
        {"resolutions", res},
    };
    j["sample"] = {
        {"grid_h", cfg.sample.grid_h},
        {"grid_w", cfg.sample.grid_w},
        {"presets", cfg.sample.presets},
    };
    j["bench"] = {
        {"sizes", cfg.bench.sizes},
        {"iters", cfg.bench.iters},
    };
    return j;
}

void apply_override(json& j, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    }
    std::string path = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);

    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;  // bare word, treat as string
    }

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) {
            throw ConfigError("--set path has an empty segment: '" + path + "'");
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config file " + path.string() + ": " + e.what());
    }
}

}  // namespace tide::cli
