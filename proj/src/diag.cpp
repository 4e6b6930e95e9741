#include "tide/diag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tide::diag {

double attention_entropy(std::span<const double> p_row) {
    if (p_row.empty()) {
        throw std::invalid_argument("attention_entropy: empty row");
    }
    double sum = 0.0;
    for (double p : p_row) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("attention_entropy: negative or NaN probability");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("attention_entropy: row is not normalized");
    }
    double h = 0.0;
    for (double p : p_row) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

double entropy_prediction(std::size_t len, double sigma_sq) {
    if (len < 2) {
        throw std::invalid_argument("entropy_prediction: L must be >= 2");
    }
    if (sigma_sq < 0.0) {
        throw std::invalid_argument("entropy_prediction: sigma_sq must be >= 0");
    }
    return std::log(static_cast<double>(len)) - sigma_sq / 2.0;
}

AttentionStats measure_stats(const RowMatrix& p, const attn::JointLogits& s,
                             const attn::TokenLayout& layout) {
    layout.validate();
    std::size_t lt = layout.text_len;
    std::size_t total = layout.total();
    if (p.rows != total || p.cols != total) {
        throw std::invalid_argument("measure_stats: P shape does not match layout");
    }
    if (s.score_text.rows != total || s.score_text.cols != lt ||
        s.score_image.rows != total || s.score_image.cols != layout.image_len()) {
        throw std::invalid_argument("measure_stats: logits shape does not match layout");
    }

    AttentionStats stats;
    stats.entropy.resize(total);
    stats.logit_variance.resize(total);
    stats.text_mass.resize(total);

    numeric::parallel_rows(total, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> scratch(total);
        for (std::size_t i = lo; i < hi; ++i) {
            stats.entropy[i] = attention_entropy(p.row(i));

            auto trow = s.score_text.row(i);
            auto irow = s.score_image.row(i);
            std::copy(trow.begin(), trow.end(), scratch.begin());
            std::copy(irow.begin(), irow.end(),
                      scratch.begin() + static_cast<std::ptrdiff_t>(lt));
            stats.logit_variance[i] = numeric::variance(scratch);

            double mass = 0.0;
            for (std::size_t j = 0; j < lt; ++j) {
                mass += p.at(i, j);
            }
            stats.text_mass[i] = mass;
        }
    });
    stats.mean_text_mass =
        numeric::mean({stats.text_mass.data() + lt, stats.text_mass.size() - lt});
    return stats;
}

InfluenceMap influence_map(std::span<const AttentionStats> stats,
                           const attn::TokenLayout& layout) {
    if (stats.empty()) {
        throw std::invalid_argument("influence_map: empty accumulation set");
    }
    layout.validate();
    std::size_t lt = layout.text_len;
    std::size_t li = layout.image_len();
    for (const auto& s : stats) {
        if (s.text_mass.size() != layout.total()) {
            throw std::invalid_argument("influence_map: stats do not share the layout");
        }
    }

    InfluenceMap map;
    map.grid_h = layout.grid_h;
    map.grid_w = layout.grid_w;
    map.accumulated = stats.size();
    map.values.assign(li, 0.0);
    for (const auto& s : stats) {
        for (std::size_t k = 0; k < li; ++k) {
            map.values[k] += s.text_mass[lt + k];
        }
    }
    for (double& v : map.values) {
        v /= static_cast<double>(stats.size());
    }

    auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) {
        std::fill(map.values.begin(), map.values.end(), 0.0);
    } else {
        for (double& v : map.values) {
            v = (v - lo) / (hi - lo);
        }
    }
    return map;
}

namespace {

std::string mode_name(sched::TempMode mode) {
    switch (mode) {
        case sched::TempMode::Off:
            return "off";
        case sched::TempMode::StaticYaRN:
            return "static-yarn";
        case sched::TempMode::DynamicGlobal:
            return "dynamic-global";
        case sched::TempMode::DynamicPerFrequency:
            return "dynamic-per-frequency";
    }
    return "off";
}

struct SyntheticCell {
    double mean_mass = 0.0;
    double mean_entropy = 0.0;
    AttentionStats map_stats;
};

// One i.i.d.-logit cell: `trials` single-query rows feed the mass/entropy
// means, one full query set feeds the influence map. Both variants of a
// layout reuse the same draws, so anchored-vs-baseline is a paired contrast.
SyntheticCell synthetic_cell(const SweepConfig& cfg, const attn::TokenLayout& layout,
                             double beta, std::size_t layout_index) {
    std::size_t lt = layout.text_len;
    std::size_t total = layout.total();
    double inv_tau = 1.0 / cfg.tau;

    std::vector<double> bias(total, 0.0);
    std::fill(bias.begin(), bias.begin() + static_cast<std::ptrdiff_t>(lt), beta);

    SyntheticCell cell;
    numeric::Pcg32 gen(cfg.seed, 16 + 2 * layout_index);
    std::vector<double> row(total);
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        for (double& v : row) {
            v = cfg.sigma * gen.next_gaussian();
        }
        auto p = numeric::softmax_row(row, inv_tau, bias);
        double mass = 0.0;
        for (std::size_t j = 0; j < lt; ++j) {
            mass += p[j];
        }
        cell.mean_mass += mass;
        cell.mean_entropy += attention_entropy(p);
    }
    cell.mean_mass /= static_cast<double>(cfg.trials);
    cell.mean_entropy /= static_cast<double>(cfg.trials);

    numeric::Pcg32 map_gen(cfg.seed, 16 + 2 * layout_index + 1);
    cell.map_stats.entropy.resize(total);
    cell.map_stats.logit_variance.resize(total);
    cell.map_stats.text_mass.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
        for (double& v : row) {
            v = cfg.sigma * map_gen.next_gaussian();
        }
        auto p = numeric::softmax_row(row, inv_tau, bias);
        double mass = 0.0;
        for (std::size_t j = 0; j < lt; ++j) {
            mass += p[j];
        }
        cell.map_stats.text_mass[i] = mass;
        cell.map_stats.entropy[i] = attention_entropy(p);
        cell.map_stats.logit_variance[i] = numeric::variance(row);
    }
    cell.map_stats.mean_text_mass = numeric::mean(
        {cell.map_stats.text_mass.data() + lt, cell.map_stats.text_mass.size() - lt});
    return cell;
}

struct ModelCell {
    double mean_mass = 0.0;
    double mean_entropy = 0.0;
    std::vector<AttentionStats> head_stats;
};

// One forward pass at the first sampling timestep, accumulating all heads of
// the first block.
ModelCell model_cell(const toydit::ToyDitConfig& config, const toydit::ToyDitWeights& weights,
                     const RowMatrix& text, const attn::TokenLayout& layout) {
    auto noise = toydit::random_noise(config, layout.grid_h, layout.grid_w);
    auto tokens = toydit::patchify(noise, config);

    ModelCell cell;
    toydit::AttnSink sink = [&](const toydit::AttnProbe& probe) {
        if (probe.block == 0) {
            cell.head_stats.push_back(measure_stats(probe.probs, probe.logits, probe.layout));
        }
    };
    toydit::forward(tokens.first, text, layout, 1.0, config, weights, sink);

    for (const auto& s : cell.head_stats) {
        cell.mean_mass += s.mean_text_mass;
        cell.mean_entropy += numeric::mean(s.entropy);
    }
    cell.mean_mass /= static_cast<double>(cell.head_stats.size());
    cell.mean_entropy /= static_cast<double>(cell.head_stats.size());
    return cell;
}

}  // namespace

SweepResult sweep_text_mass(const SweepConfig& config,
                            std::span<const attn::TokenLayout> resolutions, bool anchor_on,
                            const toydit::ToyDitConfig* model) {
    if (resolutions.empty()) {
        throw ConfigError("sweep_text_mass: no resolutions configured");
    }
    if (!config.synthetic && model == nullptr) {
        throw ConfigError("sweep_text_mass: model config required outside synthetic mode");
    }
    if (config.synthetic && config.trials < 1) {
        throw ConfigError("sweep_text_mass: trials must be >= 1");
    }

    double base_pixels;
    if (config.base_image_len > 0) {
        base_pixels = static_cast<double>(config.base_image_len);
    } else if (!config.synthetic) {
        base_pixels = static_cast<double>(model->trained_image_len());
    } else {
        base_pixels = static_cast<double>(resolutions[0].image_len());
    }

    SweepResult result;
    toydit::ToyDitWeights weights;
    RowMatrix text;
    if (!config.synthetic) {
        weights = toydit::init_weights(*model);
        text = toydit::random_text_tokens(*model);
    }

    for (std::size_t idx = 0; idx < resolutions.size(); ++idx) {
        const auto& layout = resolutions[idx];
        layout.validate();
        double lambda = static_cast<double>(layout.image_len()) / base_pixels;

        std::vector<double> betas = {0.0};
        if (anchor_on) {
            attn::AnchorPolicy adaptive;
            adaptive.enabled = true;
            adaptive.lambda = lambda;
            betas.push_back(anchoring_bias(adaptive));
        }

        for (std::size_t variant = 0; variant < betas.size(); ++variant) {
            double beta = betas[variant];
            SweepRow row;
            row.layout = layout;
            row.anchored = variant > 0;
            row.beta = beta;
            if (config.synthetic) {
                row.tau_mode = config.tau == 1.0 ? "off" : "static-yarn";
                SyntheticCell cell = synthetic_cell(config, layout, beta, idx);
                row.mean_text_mass = cell.mean_mass;
                row.mean_entropy = cell.mean_entropy;
                result.maps.push_back(
                    influence_map(std::span(&cell.map_stats, 1), layout));
            } else {
                toydit::ToyDitConfig variant = *model;
                variant.anchor.enabled = beta > 0.0;
                variant.anchor.beta_mode = attn::BetaMode::Adaptive;
                row.beta = toydit::resolve_policies(variant, layout).beta;
                row.tau_mode = mode_name(variant.temperature.mode);
                ModelCell cell = model_cell(variant, weights, text, layout);
                row.mean_text_mass = cell.mean_mass;
                row.mean_entropy = cell.mean_entropy;
                result.maps.push_back(influence_map(cell.head_stats, layout));
            }
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

std::string sweep_csv(const SweepResult& result) {
    std::string out = "resolution,L_T,L_I,beta,tau_mode,mean_text_mass,mean_entropy\n";
    char buf[256];
    for (const auto& row : result.rows) {
        std::snprintf(buf, sizeof(buf), "%zux%zu,%zu,%zu,%.12g,%s,%.12g,%.12g\n",
                      row.layout.grid_h, row.layout.grid_w, row.layout.text_len,
                      row.layout.image_len(), row.beta, row.tau_mode.c_str(),
                      row.mean_text_mass, row.mean_entropy);
        out += buf;
    }
    return out;
}

}  // namespace tide::diag
