#pragma once

#include <cstddef>
#include <optional>

#include "tide/numeric.hpp"

namespace tide::attn {

using numeric::RowMatrix;

// Sequence geometry: text tokens first, then the row-major image grid.
struct TokenLayout {
    std::size_t text_len = 8;
    std::size_t grid_h = 16;
    std::size_t grid_w = 16;

    std::size_t image_len() const { return grid_h * grid_w; }
    std::size_t total() const { return text_len + image_len(); }

    void validate() const;
};

// Pre-softmax joint scores split into the text and image column blocks.
// Concatenation order is (text, image), matching the layout.
struct JointLogits {
    RowMatrix score_text;   // L x L_T
    RowMatrix score_image;  // L x L_I
};

enum class BetaMode { Fixed, Adaptive };

// Which query rows receive the text-column bias. All follows the stated
// S_T shape; ImageOnly restricts the boost to image queries.
enum class BiasRows { All, ImageOnly };

struct AnchorPolicy {
    bool enabled = false;
    BetaMode beta_mode = BetaMode::Adaptive;
    double beta_fixed = 0.0;
    double lambda = 1.0;  // target/trained pixel-count ratio
    BiasRows bias_rows = BiasRows::All;
};

struct CrossProjection {
    RowMatrix w_q;  // c x d
    RowMatrix w_k;
    RowMatrix w_v;
};

// O = softmax(Q_I K_T^T / sqrt(d)) V_T with projections from text/image
// features; output has one row per image token.
RowMatrix cross_attention(const RowMatrix& x_image, const RowMatrix& x_text,
                          const CrossProjection& weights, std::size_t d);

// S = Q K^T evaluated directly into the (text, image) column blocks.
JointLogits joint_logits(const RowMatrix& q, const RowMatrix& k, const TokenLayout& layout);

// Fixed mode passes beta_fixed through; Adaptive computes beta = ln(lambda),
// with lambda taken from the policy or derived as scale_s^2.
double anchoring_bias(const AnchorPolicy& policy, std::optional<double> scale_s = {});

// P = softmax(S / (tau * sqrt(d)) + mask / tau) row-wise, where the mask adds
// beta to every text column. The bias rides the softmax argument like an
// additive attention mask: divided by tau, never by sqrt(d), so e^beta scales
// the text exponentials by exactly lambda when beta = ln(lambda) and tau = 1.
RowMatrix anchored_attention(const JointLogits& logits, double beta, double tau, std::size_t d,
                             BiasRows bias_rows = BiasRows::All);

// O = P V.
RowMatrix attention_output(const RowMatrix& p, const RowMatrix& v);

}  // namespace tide::attn
