#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "tide/attn.hpp"

using namespace tide;
using attn::AnchorPolicy;
using attn::BetaMode;
using attn::BiasRows;
using attn::JointLogits;
using attn::TokenLayout;
using numeric::Pcg32;
using numeric::RowMatrix;

namespace {

RowMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                        double sigma = 1.0) {
    Pcg32 gen(seed);
    RowMatrix m(rows, cols);
    for (double& v : m.data) {
        v = sigma * gen.next_gaussian();
    }
    return m;
}

JointLogits random_logits(const TokenLayout& layout, Pcg32& gen, double sigma = 1.0) {
    JointLogits s;
    s.score_text = RowMatrix(layout.total(), layout.text_len);
    s.score_image = RowMatrix(layout.total(), layout.image_len());
    for (double& v : s.score_text.data) {
        v = sigma * gen.next_gaussian();
    }
    for (double& v : s.score_image.data) {
        v = sigma * gen.next_gaussian();
    }
    return s;
}

// Long-double reference for one row of the anchored softmax: the bias is an
// additive mask on the scaled scores, divided by tau only. Shares nothing
// with the library path.
std::vector<double> oracle_row(const JointLogits& s, std::size_t i, double beta, double tau,
                               std::size_t d) {
    std::size_t lt = s.score_text.cols;
    std::size_t li = s.score_image.cols;
    long double sqrt_d = std::sqrt(static_cast<long double>(d));
    std::vector<long double> z(lt + li);
    for (std::size_t j = 0; j < lt; ++j) {
        z[j] = (s.score_text.at(i, j) / sqrt_d + beta) / static_cast<long double>(tau);
    }
    for (std::size_t j = 0; j < li; ++j) {
        z[lt + j] = s.score_image.at(i, j) / sqrt_d / static_cast<long double>(tau);
    }
    long double sum = 0.0L;
    std::vector<long double> e(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        e[j] = std::exp(z[j]);
        sum += e[j];
    }
    std::vector<double> out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        out[j] = static_cast<double>(e[j] / sum);
    }
    return out;
}

}  // namespace

TEST_CASE("cross_attention degenerate cases") {
    std::size_t c = 4, d = 4;
    attn::CrossProjection w;
    w.w_q = random_matrix(c, d, 1);
    w.w_k = random_matrix(c, d, 2);
    w.w_v = random_matrix(c, d, 3);

    // Single text token: softmax over one column is 1, every output row is
    // the projected value row.
    auto x_img = random_matrix(3, c, 4);
    auto x_txt = random_matrix(1, c, 5);
    auto out = attn::cross_attention(x_img, x_txt, w, d);
    auto v = numeric::matmul(x_txt, w.w_v);
    for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(out.at(i, j) == doctest::Approx(v.at(0, j)).epsilon(1e-12));
        }
    }

    // Identical text rows: output equals the shared value row.
    RowMatrix x_same(3, c);
    auto proto = random_matrix(1, c, 6);
    for (std::size_t i = 0; i < 3; ++i) {
        std::copy(proto.row(0).begin(), proto.row(0).end(), x_same.row(i).begin());
    }
    auto out2 = attn::cross_attention(x_img, x_same, w, d);
    auto v2 = numeric::matmul(x_same, w.w_v);
    for (std::size_t i = 0; i < out2.rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(out2.at(i, j) == doctest::Approx(v2.at(0, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("cross_attention matches a three-loop reference") {
    std::size_t c = 4, d = 4;
    attn::CrossProjection w;
    w.w_q = random_matrix(c, d, 11);
    w.w_k = random_matrix(c, d, 12);
    w.w_v = random_matrix(c, d, 13);
    auto x_img = random_matrix(3, c, 14);
    auto x_txt = random_matrix(3, c, 15);

    auto out = attn::cross_attention(x_img, x_txt, w, d);

    // Straightforward reference evaluation.
    auto project = [&](const RowMatrix& x, const RowMatrix& wm) {
        RowMatrix r(x.rows, wm.cols);
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < wm.cols; ++j) {
                for (std::size_t k = 0; k < x.cols; ++k) {
                    r.at(i, j) += x.at(i, k) * wm.at(k, j);
                }
            }
        }
        return r;
    };
    auto q = project(x_img, w.w_q);
    auto kk = project(x_txt, w.w_k);
    auto v = project(x_txt, w.w_v);
    for (std::size_t i = 0; i < q.rows; ++i) {
        std::vector<double> scores(kk.rows);
        for (std::size_t j = 0; j < kk.rows; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                acc += q.at(i, t) * kk.at(j, t);
            }
            scores[j] = acc / std::sqrt(static_cast<double>(d));
        }
        double m = *std::max_element(scores.begin(), scores.end());
        double sum = 0.0;
        for (double& sc : scores) {
            sc = std::exp(sc - m);
            sum += sc;
        }
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < kk.rows; ++t) {
                acc += scores[t] / sum * v.at(t, j);
            }
            CHECK(out.at(i, j) == doctest::Approx(acc).epsilon(1e-10));
        }
    }
}

TEST_CASE("joint_logits splits the dense product") {
    TokenLayout layout{2, 1, 2};
    auto q = random_matrix(4, 3, 21);
    auto k = random_matrix(4, 3, 22);
    auto s = attn::joint_logits(q, k, layout);
    auto dense = numeric::matmul_nt(q, k);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(s.score_text.at(i, 0) == doctest::Approx(dense.at(i, 0)).epsilon(1e-12));
        CHECK(s.score_text.at(i, 1) == doctest::Approx(dense.at(i, 1)).epsilon(1e-12));
        CHECK(s.score_image.at(i, 0) == doctest::Approx(dense.at(i, 2)).epsilon(1e-12));
        CHECK(s.score_image.at(i, 1) == doctest::Approx(dense.at(i, 3)).epsilon(1e-12));
    }

    RowMatrix zero_k(4, 3);
    auto sz = attn::joint_logits(q, zero_k, layout);
    for (double v : sz.score_text.data) {
        CHECK(v == 0.0);
    }
    for (double v : sz.score_image.data) {
        CHECK(v == 0.0);
    }

    auto bad = random_matrix(3, 3, 23);
    CHECK_THROWS_AS(attn::joint_logits(bad, k, layout), std::invalid_argument);
}

TEST_CASE("anchoring_bias adaptive and fixed modes") {
    AnchorPolicy adaptive;
    adaptive.enabled = true;
    adaptive.beta_mode = BetaMode::Adaptive;

    CHECK(attn::anchoring_bias(adaptive, 1.0) == 0.0);
    CHECK(attn::anchoring_bias(adaptive, 4.0) ==
          doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));

    adaptive.lambda = 9.0;
    CHECK(attn::anchoring_bias(adaptive) == doctest::Approx(std::log(9.0)).epsilon(1e-12));

    adaptive.lambda = 0.5;
    CHECK_THROWS_AS(attn::anchoring_bias(adaptive), std::invalid_argument);

    // Appendix-grid fixed values pass through unchanged.
    AnchorPolicy fixed;
    fixed.enabled = true;
    fixed.beta_mode = BetaMode::Fixed;
    for (double b : {1.0, 2.0, 3.0}) {
        fixed.beta_fixed = b;
        CHECK(attn::anchoring_bias(fixed) == b);
    }
}

TEST_CASE("anchored_attention constant-logit text mass") {
    // All-zero logits, L_T=512, L_I=16384, beta=ln 4: text mass per row is
    // (4*512)/(4*512+16384) = 1/9, the restoration target for the
    // unextrapolated 512/(512+4096) case.
    TokenLayout layout{512, 128, 128};
    JointLogits s;
    s.score_text = RowMatrix(layout.total(), 512);
    s.score_image = RowMatrix(layout.total(), 16384);
    auto p = attn::anchored_attention(s, std::log(4.0), 1.0, 16);
    double mass = 0.0;
    for (std::size_t j = 0; j < 512; ++j) {
        mass += p.at(1000, j);
    }
    CHECK(mass == doctest::Approx(1.0 / 9.0).epsilon(1e-10));

    TokenLayout base{512, 64, 64};
    JointLogits sb;
    sb.score_text = RowMatrix(base.total(), 512);
    sb.score_image = RowMatrix(base.total(), 4096);
    auto pb = attn::anchored_attention(sb, 0.0, 1.0, 16);
    double mass_base = 0.0;
    for (std::size_t j = 0; j < 512; ++j) {
        mass_base += pb.at(100, j);
    }
    CHECK(mass == doctest::Approx(mass_base).epsilon(1e-10));
}

TEST_CASE("anchored_attention structural properties") {
    TokenLayout layout{3, 3, 3};
    Pcg32 gen(77);
    auto s = random_logits(layout, gen);
    std::size_t total = layout.total();

    auto p = attn::anchored_attention(s, 1.7, 0.9, 4);
    for (std::size_t i = 0; i < total; ++i) {
        double sum = std::accumulate(p.row(i).begin(), p.row(i).end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    // Neutral parameters reduce to the plain joint softmax.
    auto plain = attn::anchored_attention(s, 0.0, 1.0, 4);
    for (std::size_t i = 0; i < total; ++i) {
        auto expected = oracle_row(s, i, 0.0, 1.0, 4);
        for (std::size_t j = 0; j < total; ++j) {
            CHECK(plain.at(i, j) == doctest::Approx(expected[j]).epsilon(1e-12));
        }
    }

    // Shifting every column leaves P unchanged.
    JointLogits shifted = s;
    for (double& v : shifted.score_text.data) {
        v += 13.25;
    }
    for (double& v : shifted.score_image.data) {
        v += 13.25;
    }
    auto p_shift = attn::anchored_attention(shifted, 1.7, 0.9, 4);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        CHECK(p.data[i] == doctest::Approx(p_shift.data[i]).epsilon(1e-12));
    }

    // beta > 0 strictly raises text mass; ordering of text columns survives.
    auto p0 = attn::anchored_attention(s, 0.0, 1.0, 4);
    auto p1 = attn::anchored_attention(s, 0.8, 1.0, 4);
    for (std::size_t i = 0; i < total; ++i) {
        double mass0 = 0.0, mass1 = 0.0;
        for (std::size_t j = 0; j < layout.text_len; ++j) {
            mass0 += p0.at(i, j);
            mass1 += p1.at(i, j);
        }
        CHECK(mass1 > mass0);
        std::vector<std::size_t> order_s(layout.text_len), order_p(layout.text_len);
        std::iota(order_s.begin(), order_s.end(), 0);
        order_p = order_s;
        std::sort(order_s.begin(), order_s.end(), [&](std::size_t a, std::size_t b) {
            return s.score_text.at(i, a) < s.score_text.at(i, b);
        });
        std::sort(order_p.begin(), order_p.end(), [&](std::size_t a, std::size_t b) {
            return p1.at(i, a) < p1.at(i, b);
        });
        CHECK(order_s == order_p);
    }

    // Halving tau sharpens: the row maximum strictly grows.
    auto sharp = attn::anchored_attention(s, 0.0, 0.5, 4);
    for (std::size_t i = 0; i < total; ++i) {
        double m0 = *std::max_element(p0.row(i).begin(), p0.row(i).end());
        double m1 = *std::max_element(sharp.row(i).begin(), sharp.row(i).end());
        CHECK(m1 > m0);
    }
}

TEST_CASE("anchored_attention bias row scope flag") {
    TokenLayout layout{2, 2, 2};
    Pcg32 gen(78);
    auto s = random_logits(layout, gen);
    auto all = attn::anchored_attention(s, 1.0, 1.0, 4, BiasRows::All);
    auto img = attn::anchored_attention(s, 1.0, 1.0, 4, BiasRows::ImageOnly);
    auto none = attn::anchored_attention(s, 0.0, 1.0, 4);

    // Text-query rows follow the unbiased softmax in ImageOnly mode.
    for (std::size_t j = 0; j < layout.total(); ++j) {
        CHECK(img.at(0, j) == doctest::Approx(none.at(0, j)).epsilon(1e-12));
        CHECK(img.at(layout.total() - 1, j) ==
              doctest::Approx(all.at(layout.total() - 1, j)).epsilon(1e-12));
    }
}

TEST_CASE("anchored_attention input validation") {
    TokenLayout layout{2, 2, 2};
    Pcg32 gen(79);
    auto s = random_logits(layout, gen);
    CHECK_THROWS_AS(attn::anchored_attention(s, 0.0, 0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(attn::anchored_attention(s, -1.0, 1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(attn::anchored_attention(s, 0.0, 1.0, 0), std::invalid_argument);

    s.score_image.at(3, 1) = INFINITY;
    CHECK_THROWS_AS(attn::anchored_attention(s, 0.0, 1.0, 4), NumericError);
}

TEST_CASE("attention_output basics and oracle") {
    // Identity mixing returns V.
    RowMatrix eye(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        eye.at(i, i) = 1.0;
    }
    auto v = random_matrix(3, 2, 91);
    auto out = attn::attention_output(eye, v);
    CHECK(out.data == v.data);

    // Uniform mixing averages the value rows -- the subject-vanishing mode.
    RowMatrix uniform(3, 3, 1.0 / 3.0);
    auto avg = attn::attention_output(uniform, v);
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = (v.at(0, j) + v.at(1, j) + v.at(2, j)) / 3.0;
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(avg.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
        }
    }

    auto p = random_matrix(4, 4, 92);
    auto v2 = random_matrix(4, 3, 93);
    auto prod = attn::attention_output(p, v2);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                acc += p.at(i, k) * v2.at(k, j);
            }
            CHECK(prod.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(attn::attention_output(p, random_matrix(3, 3, 94)), std::invalid_argument);
}

TEST_CASE("anchoring restores expected text mass under extrapolation") {
    // i.i.d. logits: E[mass at lambda*L_I with beta = ln lambda] equals
    // E[mass at L_I with beta = 0], checked against the long-double oracle.
    constexpr std::size_t kTrials = 400;
    constexpr double kLambda = 4.0;
    TokenLayout base{16, 8, 8};
    TokenLayout big{16, 16, 16};
    double beta = std::log(kLambda);

    Pcg32 gen(2024);
    double base_mass = 0.0;
    double restored_mass = 0.0;
    for (std::size_t trial = 0; trial < kTrials; ++trial) {
        auto sb = random_logits(base, gen, 0.75);
        auto row_b = oracle_row(sb, base.text_len, 0.0, 1.0, 1);
        for (std::size_t j = 0; j < base.text_len; ++j) {
            base_mass += row_b[j];
        }
        auto sg = random_logits(big, gen, 0.75);
        auto p = attn::anchored_attention(sg, beta, 1.0, 1);
        // Library vs oracle on the inspected row.
        auto row_o = oracle_row(sg, big.text_len, beta, 1.0, 1);
        for (std::size_t j = 0; j < big.total(); ++j) {
            CHECK(p.at(big.text_len, j) == doctest::Approx(row_o[j]).epsilon(1e-10));
        }
        for (std::size_t j = 0; j < big.text_len; ++j) {
            restored_mass += p.at(big.text_len, j);
        }
    }
    base_mass /= kTrials;
    restored_mass /= kTrials;
    CHECK(restored_mass == doctest::Approx(base_mass).epsilon(0.05));
}
