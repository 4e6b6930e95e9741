#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tide/attn.hpp"
#include "tide/toydit.hpp"

namespace tide::cli {

// Union of every policy knob plus per-subcommand settings. Defaults follow
// the reference settings: 28 steps, alpha_low 0.6, alpha_high 0.2,
// tau_max 1.0, anchors (256, 0.5) / (4096, 1.15).
struct RunConfig {
    toydit::ToyDitConfig model;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;

    struct Analyze {
        bool synthetic = false;
        std::size_t trials = 200;
        double sigma = 1.0;
        double tau = 1.0;
        std::vector<attn::TokenLayout> resolutions;
    } analyze;

    struct Sample {
        std::size_t grid_h = 32;
        std::size_t grid_w = 32;
        std::vector<std::string> presets = {"direct", "yarn", "dynamic-global", "tide"};
    } sample;

    struct Bench {
        std::vector<std::size_t> sizes = {512, 2048, 8192};
        std::size_t iters = 3;
    } bench;

    RunConfig();
};

// Fail-closed: any unknown key anywhere raises ConfigError naming the key.
RunConfig config_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const RunConfig& config);

// Parses a --set key=value override into the JSON tree (dotted paths; values
// parsed as JSON scalars, bare words as strings).
void apply_override(nlohmann::json& j, const std::string& assignment);

nlohmann::json load_config_file(const std::filesystem::path& path);

}  // namespace tide::cli
