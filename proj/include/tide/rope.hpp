#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tide/numeric.hpp"

namespace tide::rope {

using numeric::RowMatrix;

enum class InterpMode { Direct, PI, NTKAware, NTKByParts };
enum class Axis { Height, Width };

// 2D axial rotary embedding setup. head_dim splits into an even number of
// dims per axis; scale_s is the per-axis extrapolation factor.
struct RopeSpec {
    std::size_t head_dim = 16;
    std::size_t height_dims = 8;
    std::size_t width_dims = 8;
    double base = 10000.0;
    InterpMode mode = InterpMode::Direct;
    double scale_s = 1.0;
    // NTK-by-parts ramp bounds, in rotations of a pair over the trained
    // context (YaRN's alpha/beta convention).
    double ramp_low = 1.0;
    double ramp_high = 32.0;
    // Trained positions per axis; sets the wavelength/context ratio the ramp
    // is measured against.
    double trained_len = 16.0;

    void validate() const;
};

// Per-pair rotation rates for one axis. thetas are strictly decreasing;
// norm_freq is rank-linear with 1 at the fastest pair and 0 at the slowest
// (a single pair gets 1). Positions are divided by pos_scale before rotating.
struct FrequencyTable {
    std::vector<double> thetas;
    std::vector<double> norm_freq;
    double pos_scale = 1.0;

    std::size_t pairs() const { return thetas.size(); }
};

// theta_j = base^(-2j / d_axis), pos_scale = 1.
FrequencyTable base_frequencies(const RopeSpec& spec, Axis axis);

// Applies spec.mode: Direct keeps the table, PI divides positions by s,
// NTK-aware rebuilds thetas from base * s^(d/(d-2)), NTK-by-parts blends each
// pair between unchanged and theta/s by the wavelength ramp.
FrequencyTable interpolate(const RopeSpec& spec, const FrequencyTable& table);

// Time-parameterized interpolation hook. blend(t) in [0,1] moves every pair
// from its Direct frequency (0) to the fully position-interpolated theta/s
// (1). The schedule itself is caller-supplied.
FrequencyTable interpolate_timed(const RopeSpec& spec, const FrequencyTable& table, double t,
                                 const std::function<double(double)>& blend);

struct GridPos {
    std::size_t row = 0;
    std::size_t col = 0;
};

// Row-major (row, col) pair per image token.
std::vector<GridPos> axial_positions(std::size_t height, std::size_t width);

// text_len tokens pinned at (0,0) followed by the image grid.
std::vector<GridPos> positions_for_layout(std::size_t text_len, std::size_t height,
                                          std::size_t width);

// Rotates each consecutive feature pair within its axis block by
// (position / pos_scale) * theta_j. band_scale, when present, multiplies the
// rotated pair; it is indexed by global pair rank (height pairs first).
RowMatrix rotate(const RowMatrix& features, std::span<const GridPos> positions,
                 const FrequencyTable& height_table, const FrequencyTable& width_table,
                 std::span<const double> band_scale = {});

}  // namespace tide::rope
