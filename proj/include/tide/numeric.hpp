#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tide/errors.hpp"

namespace tide::numeric {

// Dense row-major matrix of 64-bit reals. Probability math stays in doubles
// even where the toy model stores 32-bit weights.
struct RowMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    RowMatrix() = default;
    RowMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

// PCG-XSH-RR 32/64 with Box-Muller gaussians. The exact recurrence is written
// out in README.md ("Random numbers") so seeds reproduce across languages.
// State is caller-owned; never global.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    // Uniform in [0, 1), 32-bit resolution.
    double next_unit();
    // Standard normal deviate; generates Box-Muller pairs, caches the second.
    double next_gaussian();

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// log(sum(exp(v))) via max-subtraction; never overflows for |v| <= 1e6.
double logsumexp(std::span<const double> values);

// softmax((logits + col_bias) * inv_temp_scale) row kernel. Callers pass
// inv_temp_scale = 1/(tau*sqrt(d)). col_bias may be empty. Max-subtraction,
// no clamping, so shift invariance holds to rounding.
std::vector<double> softmax_row(std::span<const double> logits, double inv_temp_scale,
                                std::span<const double> col_bias = {});

// n i.i.d. draws from N(0, sigma^2), deterministic in seed (stream 0).
std::vector<double> gaussian_vector(std::size_t n, double sigma, std::uint64_t seed);

double mean(std::span<const double> values);
// Population variance (divide by N).
double variance(std::span<const double> values);

RowMatrix matmul(const RowMatrix& a, const RowMatrix& b);
// a * b^T; both operands row-major, so dot products run over contiguous rows.
RowMatrix matmul_nt(const RowMatrix& a, const RowMatrix& b);

void ensure_finite(const RowMatrix& m, const char* what);

// Splits [0, count) into contiguous chunks across a few threads. Chunks are
// disjoint, so writers stay deterministic; first worker exception rethrows.
void parallel_rows(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace tide::numeric
