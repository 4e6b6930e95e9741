#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "tide/attn.hpp"
#include "tide/rope.hpp"
#include "tide/sched.hpp"

namespace tide::toydit {

using numeric::RowMatrix;

// Desk-scale MM-DiT. token_dim = heads * head_dim; the trained grid fixes the
// resolution all extrapolation scales are measured against.
struct ToyDitConfig {
    std::size_t token_dim = 64;
    std::size_t head_dim = 16;
    std::size_t heads = 4;
    std::size_t blocks = 2;
    std::size_t mlp_hidden = 128;
    std::size_t trained_h = 16;
    std::size_t trained_w = 16;
    std::size_t text_len = 8;
    rope::RopeSpec rope;
    attn::AnchorPolicy anchor;
    sched::TemperaturePolicy temperature;
    sched::TimeShiftSpec timeshift;
    std::uint64_t seed = 0;
    // Text tokens sit at position (0,0) by default; true gives token i
    // position (0, i) on the width axis instead.
    bool rope_on_text = false;
    // Blend Direct -> PI over time via interpolate_timed (the Dy-YaRN hook)
    // instead of the static spec.mode interpolation.
    bool timed_interpolation = false;
    // When true, tau_min is derived as yarn_temperature(sqrt(lambda)) for the
    // target layout; an explicit config value turns this off.
    bool tau_min_auto = true;

    std::size_t trained_image_len() const { return trained_h * trained_w; }
    void validate() const;
};

// All tensors live as doubles holding exact float32 values, so serialization
// round trips bit-exactly.
struct ToyDitWeights {
    struct Block {
        RowMatrix w_q_text, w_k_text, w_v_text;     // c x c
        RowMatrix w_q_image, w_k_image, w_v_image;  // c x c
        RowMatrix w_out;                            // c x c
        RowMatrix mlp_in;                           // c x mlp_hidden
        RowMatrix mlp_out;                          // mlp_hidden x c
    };
    std::vector<Block> blocks;
    std::vector<double> time_freqs;  // sinusoidal embedding table, c/2 entries
    RowMatrix w_final;               // c x c velocity head
};

// Seeded gaussian init, entries N(0, 1/c) quantized to float32. Regenerates
// identically from the config alone.
ToyDitWeights init_weights(const ToyDitConfig& config);

// Format: UTF-8 JSON manifest (tensor names/shapes, config hash), one NUL
// byte, then the little-endian float32 blob in manifest order.
void save_weights(const ToyDitWeights& weights, const ToyDitConfig& config,
                  const std::filesystem::path& path);
ToyDitWeights load_weights(const std::filesystem::path& path, const ToyDitConfig& config);

// Latent as a (h, w, channels) row-major grid of channel vectors.
struct LatentGrid {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    LatentGrid() = default;
    LatentGrid(std::size_t h_, std::size_t w_, std::size_t c_)
        : h(h_), w(w_), channels(c_), data(h_ * w_ * c_, 0.0) {}
};

// Flatten to row-major tokens; unpatchify inverts bit-exactly.
std::pair<RowMatrix, attn::TokenLayout> patchify(const LatentGrid& latent,
                                                 const ToyDitConfig& config);
LatentGrid unpatchify(const RowMatrix& tokens, const attn::TokenLayout& layout,
                      std::size_t channels);

// Per-(block, head) attention probe handed to an optional sink. Matrices are
// borrowed; consume them inside the callback.
struct AttnProbe {
    std::size_t step;
    double t;
    std::size_t block;
    std::size_t head;
    const RowMatrix& probs;
    const attn::JointLogits& logits;
    const attn::TokenLayout& layout;
};
using AttnSink = std::function<void(const AttnProbe&)>;

// Seeded stand-ins for encoder outputs and the sampling noise.
RowMatrix random_text_tokens(const ToyDitConfig& config);
LatentGrid random_noise(const ToyDitConfig& config, std::size_t grid_h, std::size_t grid_w);

// One joint-attention pass: velocity prediction per image token. Applies the
// configured RoPE interpolation, anchoring bias and temperature schedule for
// normalized time t.
RowMatrix forward(const RowMatrix& image_tokens, const RowMatrix& text_tokens,
                  const attn::TokenLayout& layout, double t, const ToyDitConfig& config,
                  const ToyDitWeights& weights, const AttnSink& sink = {}, std::size_t step = 0);

struct SampleResult {
    LatentGrid latent;
    std::vector<double> timesteps;
    double mu = 0.0;
};

// Euler flow-matching integration over the shifted timestep grid.
SampleResult euler_sample(const LatentGrid& noise, const RowMatrix& text_tokens,
                          const ToyDitConfig& config, const ToyDitWeights& weights,
                          const AttnSink& sink = {});

// Effective policy pieces for a target layout: lambda (pixel ratio), beta,
// per-axis RoPE scales and the temperature policy with tau_min defaulted to
// yarn_temperature(sqrt(lambda)) when unset.
struct ResolvedPolicies {
    double lambda = 1.0;
    double beta = 0.0;
    double scale_h = 1.0;
    double scale_w = 1.0;
    sched::TemperaturePolicy temperature;
};
ResolvedPolicies resolve_policies(const ToyDitConfig& config, const attn::TokenLayout& layout);

}  // namespace tide::toydit
