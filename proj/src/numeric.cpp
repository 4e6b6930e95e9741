#include "tide/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace tide::numeric {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
}

std::uint32_t Pcg32::next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double Pcg32::next_unit() {
    return next_u32() * 0x1p-32;
}

double Pcg32::next_gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    // u1 in (0,1] keeps log finite; u2 in [0,1).
    double u1 = (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("logsumexp: empty input");
    }
    double m = values[0];
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("logsumexp: non-finite input");
        }
        m = std::max(m, v);
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - m);
    }
    return m + std::log(sum);
}

std::vector<double> softmax_row(std::span<const double> logits, double inv_temp_scale,
                                std::span<const double> col_bias) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax_row: empty input");
    }
    if (!(inv_temp_scale > 0.0) || !std::isfinite(inv_temp_scale)) {
        throw std::invalid_argument("softmax_row: inv_temp_scale must be positive");
    }
    if (!col_bias.empty() && col_bias.size() != logits.size()) {
        throw std::invalid_argument("softmax_row: col_bias length mismatch");
    }

    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        double z = logits[i] + (col_bias.empty() ? 0.0 : col_bias[i]);
        if (!std::isfinite(z)) {
            throw NumericError("softmax_row: non-finite logit");
        }
        out[i] = z;
    }
    double m = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (double& v : out) {
        v = std::exp((v - m) * inv_temp_scale);
        sum += v;
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

std::vector<double> gaussian_vector(std::size_t n, double sigma, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("gaussian_vector: n must be >= 1");
    }
    if (sigma < 0.0) {
        throw std::invalid_argument("gaussian_vector: sigma must be >= 0");
    }
    Pcg32 gen(seed);
    std::vector<double> out(n);
    for (double& v : out) {
        v = sigma * gen.next_gaussian();
    }
    return out;
}

double mean(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("mean: empty input");
    }
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
    double mu = mean(values);
    double s = 0.0;
    for (double v : values) {
        s += (v - mu) * (v - mu);
    }
    return s / static_cast<double>(values.size());
}

RowMatrix matmul(const RowMatrix& a, const RowMatrix& b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: inner dimension mismatch");
    }
    RowMatrix out(a.rows, b.cols);
    parallel_rows(a.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* dst = out.data.data() + i * out.cols;
            const double* arow = a.data.data() + i * a.cols;
            for (std::size_t k = 0; k < a.cols; ++k) {
                double aik = arow[k];
                const double* brow = b.data.data() + k * b.cols;
                for (std::size_t j = 0; j < b.cols; ++j) {
                    dst[j] += aik * brow[j];
                }
            }
        }
    });
    return out;
}

RowMatrix matmul_nt(const RowMatrix& a, const RowMatrix& b) {
    if (a.cols != b.cols) {
        throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    }
    RowMatrix out(a.rows, b.rows);
    parallel_rows(a.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* arow = a.data.data() + i * a.cols;
            double* dst = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.rows; ++j) {
                const double* brow = b.data.data() + j * b.cols;
                double acc = 0.0;
                for (std::size_t k = 0; k < a.cols; ++k) {
                    acc += arow[k] * brow[k];
                }
                dst[j] = acc;
            }
        }
    });
    return out;
}

void ensure_finite(const RowMatrix& m, const char* what) {
    for (double v : m.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in ") + what);
        }
    }
}

void parallel_rows(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = std::min<std::size_t>(hw == 0 ? 1 : hw, count);
    if (workers <= 1 || count < 64) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) {
            break;
        }
        threads.emplace_back([&, w, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace tide::numeric
