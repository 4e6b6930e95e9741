#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tide/commands.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.sets, "Override a config key, e.g. --set temperature.alpha_low=0.5");
    cmd->add_option("--out", opts.out_dir, "Output directory (default: out)");
    cmd->add_option("--seed", opts.seed, "Run seed (overrides config)");
}

tide::cli::RunConfig build_config(const CommonOpts& opts) {
    nlohmann::json j = nlohmann::json::object();
    if (!opts.config_path.empty()) {
        j = tide::cli::load_config_file(opts.config_path);
    }
    for (const std::string& assignment : opts.sets) {
        tide::cli::apply_override(j, assignment);
    }
    // Flag precedence: flags > file > defaults.
    if (opts.seed) {
        j["seed"] = *opts.seed;
    }
    if (!opts.out_dir.empty()) {
        j["out_dir"] = opts.out_dir;
    }
    try {
        return tide::cli::config_from_json(j);
    } catch (const tide::ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw tide::ConfigError(std::string("invalid config value: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw tide::ConfigError(std::string("invalid config: ") + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TIDE: text-anchored attention, temperature schedules and RoPE interpolation "
                 "for diffusion-transformer resolution extrapolation"};
    app.require_subcommand(1);

    CommonOpts opts;
    CLI::App* schedule = app.add_subcommand("schedule", "Emit temperature/bias/mu schedule CSVs");
    CLI::App* analyze = app.add_subcommand("analyze", "Text-mass sweep CSV and influence maps");
    CLI::App* sample = app.add_subcommand("sample", "Run the toy sampler presets (PPM + sidecar)");
    CLI::App* bench = app.add_subcommand("bench", "Time anchored attention (ns/row CSV)");
    for (CLI::App* cmd : {schedule, analyze, sample, bench}) {
        add_common(cmd, opts);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        tide::cli::RunConfig cfg = build_config(opts);
        if (schedule->parsed()) {
            tide::cli::cmd_schedule(cfg);
        } else if (analyze->parsed()) {
            tide::cli::cmd_analyze(cfg);
        } else if (sample->parsed()) {
            tide::cli::cmd_sample(cfg);
        } else if (bench->parsed()) {
            tide::cli::cmd_bench(cfg);
        }
        return 0;
    } catch (const tide::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const tide::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const tide::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
