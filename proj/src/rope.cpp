#include "tide/rope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tide::rope {

void RopeSpec::validate() const {
    if (head_dim == 0 || head_dim % 2 != 0) {
        throw std::invalid_argument("RopeSpec: head_dim must be even and positive");
    }
    if (height_dims % 2 != 0 || width_dims % 2 != 0) {
        throw std::invalid_argument("RopeSpec: per-axis dims must be even");
    }
    if (height_dims + width_dims != head_dim) {
        throw std::invalid_argument("RopeSpec: axis split must sum to head_dim");
    }
    if (!(base > 1.0)) {
        throw std::invalid_argument("RopeSpec: base must be > 1");
    }
    if (scale_s < 1.0) {
        throw std::invalid_argument("RopeSpec: scale_s must be >= 1");
    }
    if (!(ramp_low < ramp_high)) {
        throw std::invalid_argument("RopeSpec: ramp_low must be < ramp_high");
    }
    if (!(trained_len >= 1.0)) {
        throw std::invalid_argument("RopeSpec: trained_len must be >= 1");
    }
}

namespace {

std::vector<double> rank_linear_freqs(std::size_t pairs) {
    std::vector<double> f(pairs);
    if (pairs == 1) {
        f[0] = 1.0;
        return f;
    }
    for (std::size_t j = 0; j < pairs; ++j) {
        f[j] = static_cast<double>(pairs - 1 - j) / static_cast<double>(pairs - 1);
    }
    return f;
}

std::vector<double> theta_for_base(double base, std::size_t d_axis) {
    std::size_t pairs = d_axis / 2;
    std::vector<double> thetas(pairs);
    for (std::size_t j = 0; j < pairs; ++j) {
        thetas[j] = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(d_axis));
    }
    return thetas;
}

}  // namespace

FrequencyTable base_frequencies(const RopeSpec& spec, Axis axis) {
    spec.validate();
    std::size_t d_axis = axis == Axis::Height ? spec.height_dims : spec.width_dims;
    FrequencyTable table;
    table.pos_scale = 1.0;
    if (d_axis == 0) {
        return table;
    }
    table.thetas = theta_for_base(spec.base, d_axis);
    table.norm_freq = rank_linear_freqs(d_axis / 2);
    return table;
}

FrequencyTable interpolate(const RopeSpec& spec, const FrequencyTable& table) {
    if (spec.scale_s < 1.0) {
        throw std::invalid_argument("interpolate: scale_s must be >= 1");
    }
    FrequencyTable out = table;
    if (table.pairs() == 0 || spec.scale_s == 1.0) {
        return out;
    }
    switch (spec.mode) {
        case InterpMode::Direct:
            break;
        case InterpMode::PI:
            out.pos_scale = table.pos_scale * spec.scale_s;
            break;
        case InterpMode::NTKAware: {
            std::size_t d_axis = table.pairs() * 2;
            // theta_0 is 1 either way; with a single pair the rescale is a no-op.
            if (d_axis > 2) {
                double exponent = static_cast<double>(d_axis) / static_cast<double>(d_axis - 2);
                double scaled_base = spec.base * std::pow(spec.scale_s, exponent);
                out.thetas = theta_for_base(scaled_base, d_axis);
            }
            break;
        }
        case InterpMode::NTKByParts: {
            // Rotations of pair j across the trained context; the ramp keeps
            // fast pairs and position-interpolates slow ones.
            for (std::size_t j = 0; j < out.thetas.size(); ++j) {
                double rotations = spec.trained_len * table.thetas[j] / (2.0 * std::numbers::pi);
                double gamma = (rotations - spec.ramp_low) / (spec.ramp_high - spec.ramp_low);
                gamma = std::clamp(gamma, 0.0, 1.0);
                out.thetas[j] = gamma * table.thetas[j] + (1.0 - gamma) * table.thetas[j] / spec.scale_s;
            }
            break;
        }
    }
    return out;
}

FrequencyTable interpolate_timed(const RopeSpec& spec, const FrequencyTable& table, double t,
                                 const std::function<double(double)>& blend) {
    if (spec.scale_s < 1.0) {
        throw std::invalid_argument("interpolate_timed: scale_s must be >= 1");
    }
    if (!blend) {
        throw std::invalid_argument("interpolate_timed: blend hook required");
    }
    double w = blend(t);
    if (!(w >= 0.0 && w <= 1.0)) {
        throw std::invalid_argument("interpolate_timed: blend(t) must lie in [0,1]");
    }
    FrequencyTable out = table;
    for (double& theta : out.thetas) {
        theta = (1.0 - w) * theta + w * theta / spec.scale_s;
    }
    return out;
}

std::vector<GridPos> axial_positions(std::size_t height, std::size_t width) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("axial_positions: grid dims must be >= 1");
    }
    std::vector<GridPos> out(height * width);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = {k / width, k % width};
    }
    return out;
}

std::vector<GridPos> positions_for_layout(std::size_t text_len, std::size_t height,
                                          std::size_t width) {
    std::vector<GridPos> out(text_len, GridPos{0, 0});
    auto grid = axial_positions(height, width);
    out.insert(out.end(), grid.begin(), grid.end());
    return out;
}

RowMatrix rotate(const RowMatrix& features, std::span<const GridPos> positions,
                 const FrequencyTable& height_table, const FrequencyTable& width_table,
                 std::span<const double> band_scale) {
    std::size_t h_pairs = height_table.pairs();
    std::size_t w_pairs = width_table.pairs();
    std::size_t head_dim = 2 * (h_pairs + w_pairs);
    if (features.cols != head_dim) {
        throw std::invalid_argument("rotate: feature width does not match frequency tables");
    }
    if (positions.size() != features.rows) {
        throw std::invalid_argument("rotate: positions length does not match rows");
    }
    if (!band_scale.empty() && band_scale.size() != h_pairs + w_pairs) {
        throw std::invalid_argument("rotate: band_scale length does not match pair count");
    }

    // Positions are small integers; precompute sin/cos per (position, pair).
    std::size_t max_row = 0;
    std::size_t max_col = 0;
    for (const auto& p : positions) {
        max_row = std::max(max_row, p.row);
        max_col = std::max(max_col, p.col);
    }
    auto trig_table = [](const FrequencyTable& table, std::size_t max_pos) {
        std::vector<double> cs(2 * table.pairs() * (max_pos + 1));
        for (std::size_t p = 0; p <= max_pos; ++p) {
            for (std::size_t j = 0; j < table.pairs(); ++j) {
                double angle = (static_cast<double>(p) / table.pos_scale) * table.thetas[j];
                cs[2 * (p * table.pairs() + j)] = std::cos(angle);
                cs[2 * (p * table.pairs() + j) + 1] = std::sin(angle);
            }
        }
        return cs;
    };
    std::vector<double> h_trig = trig_table(height_table, max_row);
    std::vector<double> w_trig = trig_table(width_table, max_col);

    RowMatrix out(features.rows, features.cols);
    numeric::parallel_rows(features.rows, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* src = features.data.data() + i * features.cols;
            double* dst = out.data.data() + i * out.cols;
            const double* ht = h_trig.data() + 2 * positions[i].row * h_pairs;
            for (std::size_t j = 0; j < h_pairs; ++j) {
                double c = ht[2 * j];
                double s = ht[2 * j + 1];
                double x = src[2 * j];
                double y = src[2 * j + 1];
                double scale = band_scale.empty() ? 1.0 : band_scale[j];
                dst[2 * j] = (x * c - y * s) * scale;
                dst[2 * j + 1] = (x * s + y * c) * scale;
            }
            const double* wt = w_trig.data() + 2 * positions[i].col * w_pairs;
            const double* wsrc = src + 2 * h_pairs;
            double* wdst = dst + 2 * h_pairs;
            for (std::size_t j = 0; j < w_pairs; ++j) {
                double c = wt[2 * j];
                double s = wt[2 * j + 1];
                double x = wsrc[2 * j];
                double y = wsrc[2 * j + 1];
                double scale = band_scale.empty() ? 1.0 : band_scale[h_pairs + j];
                wdst[2 * j] = (x * c - y * s) * scale;
                wdst[2 * j + 1] = (x * s + y * c) * scale;
            }
        }
    });
    return out;
}

}  // namespace tide::rope
