#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tide/attn.hpp"
#include "tide/toydit.hpp"

namespace tide::diag {

using numeric::RowMatrix;

// Per-query diagnostics of one attention matrix. Vectors cover every query
// row (text queries included); mean_text_mass averages image-query rows only.
struct AttentionStats {
    std::vector<double> entropy;         // nats
    std::vector<double> logit_variance;  // population variance of the raw row
    std::vector<double> text_mass;       // sum of text-column probabilities
    double mean_text_mass = 0.0;
};

// Min-max normalized per-image-token text mass on the layout grid.
struct InfluenceMap {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::vector<double> values;  // [0,1], row-major
    std::size_t accumulated = 0;
};

// H = -sum p ln p with 0 ln 0 := 0. Rejects rows whose sum strays from 1 by
// more than 1e-9 or with negative entries.
double attention_entropy(std::span<const double> p_row);

// ln L - sigma^2 / 2, the dilution law's prediction.
double entropy_prediction(std::size_t len, double sigma_sq);

AttentionStats measure_stats(const RowMatrix& p, const attn::JointLogits& s,
                             const attn::TokenLayout& layout);

// Mean text mass per image token across the accumulation set, reshaped to the
// grid and min-max normalized; an all-equal map normalizes to zeros.
InfluenceMap influence_map(std::span<const AttentionStats> stats,
                           const attn::TokenLayout& layout);

struct SweepConfig {
    // Synthetic mode draws i.i.d. gaussian logit rows instead of running the
    // toy model.
    bool synthetic = false;
    std::size_t trials = 200;
    double sigma = 1.0;
    std::uint64_t seed = 0;
    // Global sharpening temperature applied in synthetic mode.
    double tau = 1.0;
    // Reference image length for lambda; 0 means the first layout (synthetic)
    // or the model's trained grid.
    std::size_t base_image_len = 0;
};

struct SweepRow {
    attn::TokenLayout layout;
    bool anchored = false;
    double beta = 0.0;
    std::string tau_mode = "off";
    double mean_text_mass = 0.0;
    double mean_entropy = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    // One map per row, aligned with rows.
    std::vector<InfluenceMap> maps;
};

// One attention pass per layout at the first sampling timestep, recording
// mean text mass and entropy without anchoring and (when anchor_on) with
// beta = ln(lambda). Deterministic per seed.
SweepResult sweep_text_mass(const SweepConfig& config,
                            std::span<const attn::TokenLayout> resolutions, bool anchor_on,
                            const toydit::ToyDitConfig* model = nullptr);

// CSV with the exact header
// resolution,L_T,L_I,beta,tau_mode,mean_text_mass,mean_entropy.
std::string sweep_csv(const SweepResult& result);

}  // namespace tide::diag
