#pragma once

#include <string>

#include "tide/run_config.hpp"

namespace tide::cli {

// Subcommand bodies. Every artifact lands under config.out_dir via atomic
// writes; reruns with the same (config, seed) are byte-identical, except for
// the measured ns_per_row column bench necessarily re-times.
void cmd_schedule(const RunConfig& config);
void cmd_analyze(const RunConfig& config);
void cmd_sample(const RunConfig& config);
void cmd_bench(const RunConfig& config);

// Builds the per-method model configuration for a sample preset
// (direct | yarn | dyyarn-hook | dynamic-global | tide).
toydit::ToyDitConfig preset_config(const toydit::ToyDitConfig& base, const std::string& preset);

}  // namespace tide::cli
