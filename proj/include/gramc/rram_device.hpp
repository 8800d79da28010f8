// Copyright 2026 The GRAMC Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Behavioral 1T1R RRAM cell.
//
// The filament is reduced to one scalar x in [0, 1]; conductance is the
// affine image g = g_min + x * (g_max - g_min). A SET pulse grows x by
//
//   dx = alpha_set * max(0, exp(beta_set * (v_g - v_th_set)) - 1) * (1 - x) * n
//
// and a RESET pulse shrinks it by the mirrored expression with x as headroom,
// where n is lognormal write noise. Both saturate near the range ends, which
// gives the multi-pulse staircase switching seen under stepped gate/source
// voltages.

#include "gramc/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gramc {

struct DeviceParams {
    double g_min = 1e-6;          // S
    double g_max = 100e-6;        // S
    double pulse_width = 30e-9;   // s
    double v_set = 1.5;           // V, bit-line bias during SET
    double v_th_set = 0.5;        // V, gate threshold
    double v_th_reset = 0.5;      // V, source-line threshold
    double alpha_set = 0.02;
    double alpha_reset = 0.02;
    double beta_set = 2.0;        // 1/V
    double beta_reset = 2.0;      // 1/V
    double sigma_write = 0.1;     // lognormal sigma of the pulse increment
    double sigma_read = 0.01;     // relative Gaussian read noise
    std::uint64_t rng_seed = 1;

    static constexpr int kLevels = 16;

    [[nodiscard]] double range() const { return g_max - g_min; }
    [[nodiscard]] double level_spacing() const { return range() / (kLevels - 1); }

    void validate() const {
        if (!(g_min > 0.0) || !(g_max > g_min)) {
            throw DomainError("device params: require 0 < g_min < g_max");
        }
        if (!(sigma_write >= 0.0) || !(sigma_read >= 0.0)) {
            throw DomainError("device params: noise sigmas must be >= 0");
        }
        if (!(pulse_width > 0.0)) {
            throw DomainError("device params: pulse_width must be > 0");
        }
    }
};

/// One cell's analog state. Build it through make_state() so that x and g
/// stay tied by the affine map.
struct DeviceState {
    double x = 0.0;
    double g = 1e-6;

    friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

inline DeviceState make_state(double x, const DeviceParams& p) {
    x = std::clamp(x, 0.0, 1.0);
    return DeviceState{x, p.g_min + x * p.range()};
}

/// 4-bit conductance code.
class LevelCode {
public:
    static constexpr int kCount = DeviceParams::kLevels;

    constexpr LevelCode() = default;
    explicit LevelCode(int level) : level_(level) {
        if (level < 0 || level >= kCount) {
            throw DomainError("level code out of range [0,15]: " + std::to_string(level));
        }
    }

    [[nodiscard]] constexpr int value() const { return level_; }
    friend constexpr bool operator==(LevelCode, LevelCode) = default;
    friend constexpr auto operator<=>(LevelCode, LevelCode) = default;

private:
    int level_ = 0;
};

namespace detail {

inline double write_noise(Rng& rng, double sigma) {
    if (sigma == 0.0) return 1.0;
    return std::exp(sigma * standard_normal(rng));
}

inline double overdrive_rate(double alpha, double beta, double v, double v_th) {
    return alpha * std::max(0.0, std::exp(beta * (v - v_th)) - 1.0);
}

}  // namespace detail

inline DeviceState apply_set_pulse(const DeviceState& s, double v_g, const DeviceParams& p, Rng& rng) {
    if (v_g <= p.v_th_set) return s;
    const double rate = detail::overdrive_rate(p.alpha_set, p.beta_set, v_g, p.v_th_set);
    const double dx = rate * (1.0 - s.x) * detail::write_noise(rng, p.sigma_write);
    return make_state(s.x + dx, p);
}

inline DeviceState apply_reset_pulse(const DeviceState& s, double v_sl, const DeviceParams& p, Rng& rng) {
    if (v_sl <= p.v_th_reset) return s;
    const double rate = detail::overdrive_rate(p.alpha_reset, p.beta_reset, v_sl, p.v_th_reset);
    const double dx = rate * s.x * detail::write_noise(rng, p.sigma_write);
    return make_state(s.x - dx, p);
}

/// Verify read: g * (1 + eps), eps ~ N(0, sigma_read), clamped to the device range.
inline double read_conductance(const DeviceState& s, const DeviceParams& p, Rng& rng) {
    if (p.sigma_read == 0.0) return s.g;
    const double g = s.g * (1.0 + p.sigma_read * standard_normal(rng));
    return std::clamp(g, p.g_min, p.g_max);
}

/// Linear level spacing over [g_min, g_max].
inline double level_to_conductance(LevelCode level, const DeviceParams& p) {
    return p.g_min + level.value() * p.level_spacing();
}

/// Nearest level; an exact midpoint goes to the lower level.
inline LevelCode conductance_to_level(double g, const DeviceParams& p) {
    if (!(g >= p.g_min && g <= p.g_max)) {
        throw DomainError("conductance outside [g_min, g_max]");
    }
    const double pos = (g - p.g_min) / p.level_spacing();
    int lower = std::clamp(static_cast<int>(std::floor(pos)), 0, LevelCode::kCount - 1);
    if (lower == LevelCode::kCount - 1) return LevelCode(lower);
    const double d_lo = std::abs(g - level_to_conductance(LevelCode(lower), p));
    const double d_hi = std::abs(g - level_to_conductance(LevelCode(lower + 1), p));
    return LevelCode(d_hi < d_lo ? lower + 1 : lower);
}

}  // namespace gramc
