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

// Real matrices <-> conductance level planes.
//
// A scheme with n_slices = 1 uses 4-bit codes (0..15), n_slices = 2 uses
// 8-bit codes split as code = 16 * msb + lsb. Differential mode keeps
// positive and negative parts on separate planes. Code zero is level 0;
// the g_min floor it leaves in the currents cancels between differential
// planes, and in nonnegative mode is removed digitally by the caller.

#include "gramc/common.hpp"
#include "gramc/rram_device.hpp"

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace gramc {

enum class SignedMode { Differential, Nonnegative };

inline std::string_view to_string(SignedMode m) {
    return m == SignedMode::Differential ? "differential" : "nonnegative";
}

inline SignedMode parse_signed_mode(std::string_view s) {
    if (s == "differential") return SignedMode::Differential;
    if (s == "nonnegative" || s == "offset-free-nonnegative") return SignedMode::Nonnegative;
    throw InputError("unknown signed mode '" + std::string(s) + "'");
}

struct QuantizationScheme {
    int bits_per_device = 4;
    int n_slices = 1;
    SignedMode signed_mode = SignedMode::Differential;
    double a_max = 1.0;
    /// Problem units per siemens of one code step; set by quantize_matrix.
    double scale = 0.0;

    [[nodiscard]] int total_bits() const { return bits_per_device * n_slices; }
    [[nodiscard]] int max_code() const { return (1 << total_bits()) - 1; }
    [[nodiscard]] double quantum() const { return a_max / max_code(); }

    void validate() const {
        if (bits_per_device != 4) throw DomainError("scheme: devices hold 4 bits");
        if (n_slices != 1 && n_slices != 2) throw DomainError("scheme: n_slices must be 1 or 2");
        if (!(a_max > 0.0) || !std::isfinite(a_max)) throw DomainError("scheme: a_max must be > 0");
    }
};

struct PlaneRole {
    int sign = 1;    // +1 positive plane, -1 negative plane
    int slice = 0;   // 0 = most significant
    [[nodiscard]] bool operator==(const PlaneRole&) const = default;
};

struct MappedMatrix {
    std::vector<LevelMatrix> level_planes;
    std::vector<PlaneRole> roles;
    QuantizationScheme scheme;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    /// Weight of plane k in code units: sign * 16^(n_slices - 1 - slice).
    [[nodiscard]] double plane_weight(std::size_t k) const {
        const PlaneRole& r = roles.at(k);
        return r.sign * std::pow(16.0, scheme.n_slices - 1 - r.slice);
    }

    [[nodiscard]] std::size_t plane_index(int sign, int slice) const {
        for (std::size_t k = 0; k < roles.size(); ++k)
            if (roles[k].sign == sign && roles[k].slice == slice) return k;
        throw DomainError("mapped matrix has no such plane");
    }
};

namespace detail {

/// Round half to even regardless of the caller's floating-point environment.
inline double round_half_even(double v) {
    const double r = std::round(v);
    if (std::abs(v - std::trunc(v)) == 0.5) return 2.0 * std::round(v / 2.0);
    return r;
}

}  // namespace detail

/// Quantizes `a` onto level planes. Plane order: differential
/// [pos(, pos_lsb), neg(, neg_lsb)], nonnegative [plane(, lsb)].
inline MappedMatrix quantize_matrix(const Matrix& a, QuantizationScheme scheme, const DeviceParams& device = {}) {
    scheme.validate();
    if (!a.allFinite()) throw DomainError("quantize: matrix has non-finite entries");
    scheme.scale = scheme.quantum() / device.level_spacing();

    MappedMatrix mm;
    mm.scheme = scheme;
    mm.rows = a.rows();
    mm.cols = a.cols();

    const int max_code = scheme.max_code();
    auto codes_of = [&](const Matrix& part) {
        LevelMatrix codes(part.rows(), part.cols());
        for (Eigen::Index i = 0; i < part.rows(); ++i)
            for (Eigen::Index j = 0; j < part.cols(); ++j) {
                const double v = std::clamp(part(i, j), 0.0, scheme.a_max);
                codes(i, j) = static_cast<int>(detail::round_half_even(v / scheme.a_max * max_code));
            }
        return codes;
    };
    auto push_planes = [&](const LevelMatrix& codes, int sign) {
        if (scheme.n_slices == 1) {
            mm.level_planes.push_back(codes);
            mm.roles.push_back({sign, 0});
        } else {
            mm.level_planes.push_back(codes.unaryExpr([](int c) { return c / 16; }));
            mm.roles.push_back({sign, 0});
            mm.level_planes.push_back(codes.unaryExpr([](int c) { return c % 16; }));
            mm.roles.push_back({sign, 1});
        }
    };

    if (scheme.signed_mode == SignedMode::Differential) {
        push_planes(codes_of(a.cwiseMax(0.0)), +1);
        push_planes(codes_of((-a).cwiseMax(0.0)), -1);
    } else {
        push_planes(codes_of(a), +1);
    }
    return mm;
}

/// The signed matrix the planes represent, in problem units.
inline Matrix reconstruct_effective_matrix(const MappedMatrix& mm) {
    Matrix out = Matrix::Zero(mm.rows, mm.cols);
    for (std::size_t k = 0; k < mm.level_planes.size(); ++k) {
        out += mm.plane_weight(k) * mm.level_planes[k].cast<double>();
    }
    return out * mm.scheme.quantum();
}

/// Bit-slice recombination: (16 * msb + lsb) * quantum. Inputs are in
/// level-code units.
inline Vector combine_slices(const Vector& v_msb, const Vector& v_lsb, const QuantizationScheme& scheme) {
    if (v_msb.size() != v_lsb.size()) throw DomainError("combine_slices: length mismatch");
    if (scheme.n_slices != 2) throw DomainError("combine_slices: scheme is not bit-sliced");
    return (16.0 * v_msb + v_lsb) * scheme.quantum();
}

/// Nonnegative mapping keeps the level-0 floor g_min on every cell, which
/// adds -R_f * g_min * sum(v_in) to every MVM output. This removes it.
inline Vector remove_conductance_floor(const Vector& v_out, const Vector& v_in, double tia_gain, double g_min) {
    return v_out.array() + tia_gain * g_min * v_in.sum();
}

/// Positive plane minus negative plane (the analog inverter path).
inline Vector signed_output_combine(const Vector& v_pos, const Vector& v_neg) {
    if (v_pos.size() != v_neg.size()) throw DomainError("signed_output_combine: length mismatch");
    return v_pos - v_neg;
}

}  // namespace gramc
