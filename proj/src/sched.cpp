#include "tide/sched.hpp"

#include <cmath>
#include <stdexcept>

namespace tide::sched {

void TemperaturePolicy::validate() const {
    if (!(tau_min > 0.0) || !(tau_max > 0.0)) {
        throw std::invalid_argument("TemperaturePolicy: temperatures must be positive");
    }
    if (tau_min > tau_max) {
        throw std::invalid_argument("TemperaturePolicy: tau_min must be <= tau_max");
    }
    if (mode == TempMode::DynamicPerFrequency) {
        // alpha_low == alpha_high degenerates to a single curve, and
        // alpha_low == alpha_high == 0 disables the dynamic schedule entirely;
        // both ablation rows stay expressible. Inverted ordering is rejected.
        if (alpha_high < 0.0 || alpha_low < alpha_high) {
            throw std::invalid_argument(
                "TemperaturePolicy: requires alpha_low >= alpha_high >= 0");
        }
    }
}

void TimeShiftSpec::validate() const {
    if (steps < 1) {
        throw std::invalid_argument("TimeShiftSpec: steps must be >= 1");
    }
    if (!(anchor_lo_tokens > 0.0) || !(anchor_hi_tokens > anchor_lo_tokens)) {
        throw std::invalid_argument("TimeShiftSpec: anchor token counts must be increasing");
    }
}

double yarn_temperature(double scale_s) {
    if (scale_s < 1.0) {
        throw std::invalid_argument("yarn_temperature: scale must be >= 1");
    }
    double root = 0.1 * std::log(scale_s) + 1.0;
    return 1.0 / (root * root);
}

double alpha_of_frequency(double f, const TemperaturePolicy& policy) {
    if (!(f >= 0.0 && f <= 1.0)) {
        throw std::invalid_argument("alpha_of_frequency: f must lie in [0,1]");
    }
    if (policy.mode != TempMode::DynamicGlobal && policy.mode != TempMode::DynamicPerFrequency) {
        throw std::invalid_argument("alpha_of_frequency: policy is not dynamic");
    }
    return policy.alpha_low + (policy.alpha_high - policy.alpha_low) * f;
}

double dynamic_temperature(double t, double f, const TemperaturePolicy& policy) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("dynamic_temperature: t must lie in [0,1]");
    }
    if (!(f >= 0.0 && f <= 1.0)) {
        throw std::invalid_argument("dynamic_temperature: f must lie in [0,1]");
    }
    policy.validate();
    switch (policy.mode) {
        case TempMode::Off:
            return 1.0;
        case TempMode::StaticYaRN:
            return policy.tau_min;
        case TempMode::DynamicGlobal: {
            if (t == 1.0) {
                return policy.tau_min;
            }
            return policy.tau_max - (policy.tau_max - policy.tau_min) * t;
        }
        case TempMode::DynamicPerFrequency: {
            double alpha = alpha_of_frequency(f, policy);
            // t^0 = 1 for every t, so alpha = 0 pins the band at tau_min.
            if (alpha == 0.0 || t == 1.0) {
                return policy.tau_min;
            }
            if (t == 0.0) {
                return policy.tau_max;
            }
            return policy.tau_max - (policy.tau_max - policy.tau_min) * std::pow(t, alpha);
        }
    }
    throw std::invalid_argument("dynamic_temperature: unknown mode");
}

std::vector<double> band_scale_factors(const rope::FrequencyTable& height_table,
                                       const rope::FrequencyTable& width_table, double t,
                                       const TemperaturePolicy& policy) {
    if (policy.mode != TempMode::DynamicPerFrequency) {
        throw std::invalid_argument("band_scale_factors: policy is not per-frequency");
    }
    std::vector<double> factors;
    factors.reserve(height_table.pairs() + width_table.pairs());
    for (const auto* table : {&height_table, &width_table}) {
        for (std::size_t j = 0; j < table->pairs(); ++j) {
            double tau = dynamic_temperature(t, table->norm_freq[j], policy);
            factors.push_back(1.0 / std::sqrt(tau));
        }
    }
    return factors;
}

double shift_mu(std::size_t image_tokens, const TimeShiftSpec& spec) {
    spec.validate();
    if (image_tokens < 1) {
        throw std::invalid_argument("shift_mu: image_tokens must be >= 1");
    }
    double tokens = static_cast<double>(image_tokens);
    // Anchors are fixed points of the schedule by definition.
    if (tokens == spec.anchor_lo_tokens) {
        return spec.anchor_lo_mu;
    }
    if (tokens == spec.anchor_hi_tokens) {
        return spec.anchor_hi_mu;
    }
    double w;
    if (spec.mode == ShiftMode::Logarithmic) {
        w = (std::log(tokens) - std::log(spec.anchor_lo_tokens)) /
            (std::log(spec.anchor_hi_tokens) - std::log(spec.anchor_lo_tokens));
    } else {
        w = (tokens - spec.anchor_lo_tokens) / (spec.anchor_hi_tokens - spec.anchor_lo_tokens);
    }
    return spec.anchor_lo_mu + (spec.anchor_hi_mu - spec.anchor_lo_mu) * w;
}

std::vector<double> shifted_timesteps(const TimeShiftSpec& spec, double mu) {
    spec.validate();
    if (!std::isfinite(mu)) {
        throw std::invalid_argument("shifted_timesteps: mu must be finite");
    }
    double exp_mu = std::exp(mu);
    std::vector<double> out(spec.steps + 1);
    for (std::size_t i = 0; i <= spec.steps; ++i) {
        double u = 1.0 - static_cast<double>(i) / static_cast<double>(spec.steps);
        out[i] = exp_mu * u / (exp_mu * u + 1.0 - u);
    }
    out.front() = 1.0;
    out.back() = 0.0;
    return out;
}

}  // namespace tide::sched
