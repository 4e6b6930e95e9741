#include "tide/attn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tide::attn {

void TokenLayout::validate() const {
    if (text_len < 1) {
        throw std::invalid_argument("TokenLayout: text_len must be >= 1");
    }
    if (grid_h < 1 || grid_w < 1) {
        throw std::invalid_argument("TokenLayout: grid dims must be >= 1");
    }
}

RowMatrix cross_attention(const RowMatrix& x_image, const RowMatrix& x_text,
                          const CrossProjection& weights, std::size_t d) {
    if (weights.w_q.cols != d || weights.w_k.cols != d || weights.w_v.cols != d) {
        throw std::invalid_argument("cross_attention: projection width does not match d");
    }
    if (x_image.cols != weights.w_q.rows || x_text.cols != weights.w_k.rows ||
        x_text.cols != weights.w_v.rows) {
        throw std::invalid_argument("cross_attention: feature dim does not match projections");
    }
    RowMatrix q = numeric::matmul(x_image, weights.w_q);
    RowMatrix k = numeric::matmul(x_text, weights.w_k);
    RowMatrix v = numeric::matmul(x_text, weights.w_v);
    RowMatrix s = numeric::matmul_nt(q, k);

    double inv = 1.0 / std::sqrt(static_cast<double>(d));
    RowMatrix p(s.rows, s.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        auto row = numeric::softmax_row(s.row(i), inv);
        std::copy(row.begin(), row.end(), p.row(i).begin());
    }
    return numeric::matmul(p, v);
}

JointLogits joint_logits(const RowMatrix& q, const RowMatrix& k, const TokenLayout& layout) {
    layout.validate();
    if (q.rows != layout.total() || k.rows != layout.total()) {
        throw std::invalid_argument("joint_logits: row count does not match layout");
    }
    if (q.cols != k.cols) {
        throw std::invalid_argument("joint_logits: Q/K width mismatch");
    }
    std::size_t lt = layout.text_len;
    std::size_t li = layout.image_len();
    JointLogits out;
    out.score_text = RowMatrix(q.rows, lt);
    out.score_image = RowMatrix(q.rows, li);
    numeric::parallel_rows(q.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* qrow = q.data.data() + i * q.cols;
            double* t_dst = out.score_text.data.data() + i * lt;
            double* i_dst = out.score_image.data.data() + i * li;
            for (std::size_t j = 0; j < lt + li; ++j) {
                const double* krow = k.data.data() + j * k.cols;
                double acc = 0.0;
                for (std::size_t c = 0; c < q.cols; ++c) {
                    acc += qrow[c] * krow[c];
                }
                if (j < lt) {
                    t_dst[j] = acc;
                } else {
                    i_dst[j - lt] = acc;
                }
            }
        }
    });
    return out;
}

double anchoring_bias(const AnchorPolicy& policy, std::optional<double> scale_s) {
    if (policy.beta_mode == BetaMode::Fixed) {
        return policy.beta_fixed;
    }
    double lambda = policy.lambda;
    if (scale_s) {
        if (*scale_s < 1.0) {
            throw std::invalid_argument("anchoring_bias: scale_s must be >= 1");
        }
        lambda = *scale_s * *scale_s;
    }
    if (lambda < 1.0) {
        throw std::invalid_argument("anchoring_bias: lambda must be >= 1 in adaptive mode");
    }
    return std::log(lambda);
}

RowMatrix anchored_attention(const JointLogits& logits, double beta, double tau, std::size_t d,
                             BiasRows bias_rows) {
    const RowMatrix& st = logits.score_text;
    const RowMatrix& si = logits.score_image;
    if (st.rows != si.rows) {
        throw std::invalid_argument("anchored_attention: block row counts differ");
    }
    std::size_t lt = st.cols;
    std::size_t li = si.cols;
    std::size_t total = lt + li;
    if (st.rows != total) {
        throw std::invalid_argument("anchored_attention: logits are not a joint square");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("anchored_attention: tau must be positive");
    }
    if (d < 1) {
        throw std::invalid_argument("anchored_attention: d must be >= 1");
    }
    if (beta < 0.0 || !std::isfinite(beta)) {
        throw std::invalid_argument("anchored_attention: beta must be >= 0");
    }

    double sqrt_d = std::sqrt(static_cast<double>(d));
    double inv = 1.0 / (tau * sqrt_d);
    // Mask semantics: the bias lands on the softmax argument itself, so the
    // exponent gains beta/tau and never loses a sqrt(d) factor. Pre-scaling
    // by sqrt(d) here cancels the shared 1/(tau sqrt(d)).
    double beta_pre = beta * sqrt_d;
    RowMatrix p(total, total);
    numeric::parallel_rows(total, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double b = (bias_rows == BiasRows::All || i >= lt) ? beta_pre : 0.0;
            const double* trow = st.data.data() + i * lt;
            const double* irow = si.data.data() + i * li;
            double* dst = p.data.data() + i * total;
            for (std::size_t j = 0; j < lt; ++j) {
                dst[j] = trow[j] + b;
            }
            for (std::size_t j = 0; j < li; ++j) {
                dst[lt + j] = irow[j];
            }
            double m = dst[0];
            for (std::size_t j = 0; j < total; ++j) {
                if (!std::isfinite(dst[j])) {
                    throw NumericError("anchored_attention: non-finite logit");
                }
                m = std::max(m, dst[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < total; ++j) {
                dst[j] = std::exp((dst[j] - m) * inv);
                sum += dst[j];
            }
            for (std::size_t j = 0; j < total; ++j) {
                dst[j] /= sum;
            }
        }
    });
    return p;
}

RowMatrix attention_output(const RowMatrix& p, const RowMatrix& v) {
    return numeric::matmul(p, v);
}

}  // namespace tide::attn
