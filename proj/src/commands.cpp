#include "tide/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "tide/diag.hpp"
#include "tide/image_io.hpp"

namespace tide::cli {

using numeric::RowMatrix;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

attn::TokenLayout sample_layout(const RunConfig& cfg) {
    return {cfg.model.text_len, cfg.sample.grid_h, cfg.sample.grid_w};
}

}  // namespace

toydit::ToyDitConfig preset_config(const toydit::ToyDitConfig& base, const std::string& preset) {
    toydit::ToyDitConfig cfg = base;
    cfg.timed_interpolation = false;
    if (preset == "direct") {
        cfg.rope.mode = rope::InterpMode::Direct;
        cfg.anchor.enabled = false;
        cfg.temperature.mode = sched::TempMode::Off;
    } else if (preset == "yarn") {
        cfg.rope.mode = rope::InterpMode::NTKByParts;
        cfg.anchor.enabled = false;
        cfg.temperature.mode = sched::TempMode::StaticYaRN;
    } else if (preset == "dyyarn-hook") {
        cfg.rope.mode = rope::InterpMode::Direct;
        cfg.timed_interpolation = true;
        cfg.anchor.enabled = false;
        cfg.temperature.mode = sched::TempMode::StaticYaRN;
    } else if (preset == "dynamic-global") {
        cfg.rope.mode = rope::InterpMode::NTKByParts;
        cfg.anchor.enabled = false;
        cfg.temperature.mode = sched::TempMode::DynamicGlobal;
    } else if (preset == "tide") {
        cfg.rope.mode = rope::InterpMode::NTKByParts;
        cfg.anchor.enabled = true;
        cfg.anchor.beta_mode = attn::BetaMode::Adaptive;
        cfg.temperature.mode = sched::TempMode::DynamicPerFrequency;
    } else {
        throw ConfigError("unknown sample preset '" + preset + "'");
    }
    return cfg;
}

void cmd_schedule(const RunConfig& cfg) {
    attn::TokenLayout layout = sample_layout(cfg);
    auto pol = toydit::resolve_policies(cfg.model, layout);
    double mu = sched::shift_mu(layout.image_len(), cfg.model.timeshift);
    auto ts = sched::shifted_timesteps(cfg.model.timeshift, mu);

    std::string schedule = "step,u,t,mu,tau_f0,tau_f1\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double u = 1.0 - static_cast<double>(i) / static_cast<double>(cfg.model.timeshift.steps);
        double tau0 = sched::dynamic_temperature(ts[i], 0.0, pol.temperature);
        double tau1 = sched::dynamic_temperature(ts[i], 1.0, pol.temperature);
        schedule += std::to_string(i) + "," + fmt(u) + "," + fmt(ts[i]) + "," + fmt(mu) + "," +
                    fmt(tau0) + "," + fmt(tau1) + "\n";
    }
    io::write_file_atomic(cfg.out_dir / "schedule.csv", schedule);

    std::string bias = "s,beta,tau_min\n";
    for (int s = 1; s <= 8; ++s) {
        attn::AnchorPolicy adaptive;
        adaptive.enabled = true;
        double beta = attn::anchoring_bias(adaptive, static_cast<double>(s));
        bias += std::to_string(s) + "," + fmt(beta) + "," +
                fmt(sched::yarn_temperature(static_cast<double>(s))) + "\n";
    }
    io::write_file_atomic(cfg.out_dir / "bias_curve.csv", bias);

    std::string mus = "L_I,mu_log,mu_linear\n";
    for (std::size_t tokens : {256, 1024, 4096, 16384, 65536}) {
        sched::TimeShiftSpec log_spec = cfg.model.timeshift;
        log_spec.mode = sched::ShiftMode::Logarithmic;
        sched::TimeShiftSpec lin_spec = cfg.model.timeshift;
        lin_spec.mode = sched::ShiftMode::LinearDefault;
        mus += std::to_string(tokens) + "," + fmt(sched::shift_mu(tokens, log_spec)) + "," +
               fmt(sched::shift_mu(tokens, lin_spec)) + "\n";
    }
    io::write_file_atomic(cfg.out_dir / "mu_curve.csv", mus);

    std::printf("schedule: wrote %s, %s, %s\n", (cfg.out_dir / "schedule.csv").c_str(),
                (cfg.out_dir / "bias_curve.csv").c_str(), (cfg.out_dir / "mu_curve.csv").c_str());
}

void cmd_analyze(const RunConfig& cfg) {
    if (cfg.analyze.resolutions.empty()) {
        throw ConfigError("analyze: resolution list is empty");
    }
    diag::SweepConfig sweep;
    sweep.synthetic = cfg.analyze.synthetic;
    sweep.trials = cfg.analyze.trials;
    sweep.sigma = cfg.analyze.sigma;
    sweep.tau = cfg.analyze.tau;
    sweep.seed = cfg.seed;

    diag::SweepResult result = diag::sweep_text_mass(
        sweep, cfg.analyze.resolutions, /*anchor_on=*/true,
        cfg.analyze.synthetic ? nullptr : &cfg.model);

    io::write_file_atomic(cfg.out_dir / "text_mass.csv", diag::sweep_csv(result));
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        std::string name = "influence_" + std::to_string(row.layout.grid_h) + "x" +
                           std::to_string(row.layout.grid_w) + "_" +
                           (row.anchored ? "anchored" : "baseline") + ".pgm";
        io::write_file_atomic(cfg.out_dir / name, io::influence_map_pgm(result.maps[i]));
    }
    std::printf("analyze: wrote %s and %zu influence maps\n",
                (cfg.out_dir / "text_mass.csv").c_str(), result.maps.size());
}

void cmd_sample(const RunConfig& cfg) {
    if (cfg.sample.presets.empty()) {
        throw ConfigError("sample: preset list is empty");
    }
    attn::TokenLayout layout = sample_layout(cfg);

    for (const std::string& preset : cfg.sample.presets) {
        toydit::ToyDitConfig model = preset_config(cfg.model, preset);
        toydit::ToyDitWeights weights = toydit::init_weights(model);
        RowMatrix text = toydit::random_text_tokens(model);
        toydit::LatentGrid noise = toydit::random_noise(model, layout.grid_h, layout.grid_w);
        auto pol = toydit::resolve_policies(model, layout);

        std::vector<double> step_mass(model.timeshift.steps, 0.0);
        toydit::AttnSink sink = [&](const toydit::AttnProbe& probe) {
            if (probe.block != 0) {
                return;
            }
            std::size_t lt = probe.layout.text_len;
            double mass = 0.0;
            for (std::size_t i = lt; i < probe.probs.rows; ++i) {
                const double* row = probe.probs.data.data() + i * probe.probs.cols;
                for (std::size_t j = 0; j < lt; ++j) {
                    mass += row[j];
                }
            }
            mass /= static_cast<double>(probe.probs.rows - lt);
            step_mass[probe.step] += mass / static_cast<double>(model.heads);
        };

        toydit::SampleResult sample = toydit::euler_sample(noise, text, model, weights, sink);

        io::write_file_atomic(cfg.out_dir / ("sample_" + preset + ".ppm"),
                              io::latent_ppm(sample.latent));

        nlohmann::json sidecar;
        sidecar["preset"] = preset;
        sidecar["seed"] = cfg.seed;
        sidecar["mu"] = sample.mu;
        sidecar["beta"] = pol.beta;
        sidecar["lambda"] = pol.lambda;
        // The echoed config describes the experiment, not the artifact
        // location; dropping out_dir keeps sidecars rerun-identical.
        sidecar["config"] = config_to_json(cfg);
        sidecar["config"].erase("out_dir");
        sidecar["timesteps"] = sample.timesteps;
        nlohmann::json tau0 = nlohmann::json::array();
        nlohmann::json tau1 = nlohmann::json::array();
        for (std::size_t i = 0; i < model.timeshift.steps; ++i) {
            tau0.push_back(sched::dynamic_temperature(sample.timesteps[i], 0.0, pol.temperature));
            tau1.push_back(sched::dynamic_temperature(sample.timesteps[i], 1.0, pol.temperature));
        }
        sidecar["tau_f0"] = tau0;
        sidecar["tau_f1"] = tau1;
        sidecar["mean_text_mass"] = step_mass;
        io::write_file_atomic(cfg.out_dir / ("sample_" + preset + ".json"),
                              sidecar.dump(2) + "\n");
        std::printf("sample: preset %s done (mu=%.4f beta=%.4f)\n", preset.c_str(), sample.mu,
                    pol.beta);
    }
}

void cmd_bench(const RunConfig& cfg) {
    std::string csv = "L,L_T,L_I,iters,ns_per_row\n";
    std::size_t text_len = cfg.model.text_len;
    for (std::size_t idx = 0; idx < cfg.bench.sizes.size(); ++idx) {
        std::size_t total = cfg.bench.sizes[idx];
        if (total <= text_len) {
            throw ConfigError("bench: size must exceed text_len");
        }
        std::size_t li = total - text_len;
        numeric::Pcg32 gen(cfg.seed, 4 + idx);
        attn::JointLogits logits;
        logits.score_text = RowMatrix(total, text_len);
        logits.score_image = RowMatrix(total, li);
        for (double& v : logits.score_text.data) {
            v = gen.next_gaussian();
        }
        for (double& v : logits.score_image.data) {
            v = gen.next_gaussian();
        }

        double beta = std::log(4.0);
        attn::anchored_attention(logits, beta, 0.9, 16);  // warm-up
        auto start = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < cfg.bench.iters; ++i) {
            attn::anchored_attention(logits, beta, 0.9, 16);
        }
        auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
        double per_row = static_cast<double>(ns) /
                         static_cast<double>(cfg.bench.iters * total);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%zu,%.1f\n", total, text_len, li,
                      cfg.bench.iters, per_row);
        csv += buf;
        std::printf("bench: L=%zu %.1f ns/row\n", total, per_row);
    }
    io::write_file_atomic(cfg.out_dir / "bench.csv", csv);
}

}  // namespace tide::cli
