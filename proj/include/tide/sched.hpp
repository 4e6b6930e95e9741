#pragma once

#include <cstddef>
#include <vector>

#include "tide/rope.hpp"

namespace tide::sched {

enum class TempMode { Off, StaticYaRN, DynamicGlobal, DynamicPerFrequency };

struct TemperaturePolicy {
    TempMode mode = TempMode::Off;
    double tau_min = 1.0;
    double tau_max = 1.0;
    // Convexity exponents at the lowest (f=0) and highest (f=1) PE frequency.
    double alpha_low = 0.6;
    double alpha_high = 0.2;

    void validate() const;
};

enum class ShiftMode { LinearDefault, Logarithmic };

// mu anchors: (256 tokens, 0.5) and (4096 tokens, 1.15).
struct TimeShiftSpec {
    ShiftMode mode = ShiftMode::Logarithmic;
    double anchor_lo_tokens = 256.0;
    double anchor_lo_mu = 0.5;
    double anchor_hi_tokens = 4096.0;
    double anchor_hi_mu = 1.15;
    std::size_t steps = 28;

    void validate() const;
};

// tau = 1 / (0.1 ln s + 1)^2; always <= 1, decreasing in s.
double yarn_temperature(double scale_s);

// alpha(f) = alpha_low + (alpha_high - alpha_low) * f for f in [0,1].
double alpha_of_frequency(double f, const TemperaturePolicy& policy);

// Temperature at normalized time t (1 -> 0 over denoising) and normalized
// frequency f. Off -> 1, StaticYaRN -> tau_min, DynamicGlobal is linear in t,
// DynamicPerFrequency bends the curve with t^alpha(f). Endpoints are exact.
double dynamic_temperature(double t, double f, const TemperaturePolicy& policy);

// Per-pair factors tau(t, f_j)^(-1/2) for DynamicPerFrequency mode, applied
// identically to Q and K bands so each band's logit is divided by tau(t, f_j).
// Height-axis pairs come first, matching rope::rotate.
std::vector<double> band_scale_factors(const rope::FrequencyTable& height_table,
                                       const rope::FrequencyTable& width_table, double t,
                                       const TemperaturePolicy& policy);

// mu for a given image-token count: logarithmic in ln(L_I) through the two
// anchors, or linear in L_I through the same anchors.
double shift_mu(std::size_t image_tokens, const TimeShiftSpec& spec);

// Descending grid of steps+1 times: u_i = 1 - i/steps warped through
// t = e^mu u / (e^mu u + 1 - u). Endpoints are exactly 1 and 0.
std::vector<double> shifted_timesteps(const TimeShiftSpec& spec, double mu);

}  // namespace tide::sched
