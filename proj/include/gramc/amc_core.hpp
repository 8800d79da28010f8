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

// Reconfigurable analog macro: the same array + OPA set wired as MVM, INV,
// PINV or EGV by the transmission-gate register. Steady states are computed
// algebraically from one noisy conductance read per plane per solve.
//
// Scale convention: the feedback/input resistor R_f (tia_gain) makes R_f * G
// dimensionless, so with G = A / R_f the outputs are in problem units:
//   MVM   v = -R_f G^T v_in
//   INV   R_f G v = -b                 (input currents b / R_f)
//   PINV  (A_t A) x = A_t b            (A = R_f G_a, A_t = R_f G_at)
//   EGV   (R_f G - lambda I) v = 0

#include "gramc/common.hpp"
#include "gramc/crossbar_array.hpp"

#include <bit>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace gramc {

enum class Topology { MVM, INV, PINV, EGV };

inline std::string_view to_string(Topology t) {
    switch (t) {
        case Topology::MVM: return "MVM";
        case Topology::INV: return "INV";
        case Topology::PINV: return "PINV";
        case Topology::EGV: return "EGV";
    }
    return "?";
}

inline Topology parse_topology(std::string_view s) {
    if (s == "MVM" || s == "mvm") return Topology::MVM;
    if (s == "INV" || s == "inv") return Topology::INV;
    if (s == "PINV" || s == "pinv") return Topology::PINV;
    if (s == "EGV" || s == "egv") return Topology::EGV;
    throw InputError("unknown topology '" + std::string(s) + "'");
}

// -----------------------------------------------------------------------------
// Register array
// -----------------------------------------------------------------------------

/// Transmission gates of one macro.
namespace gate {
inline constexpr unsigned kDacToRows = 1u << 0;      // DAC drives the bit lines
inline constexpr unsigned kTiaFeedback = 1u << 1;    // R_f across each TIA
inline constexpr unsigned kArrayFeedback = 1u << 2;  // OPA outputs drive the array
inline constexpr unsigned kCurrentInject = 1u << 3;  // input currents into OPA nodes
inline constexpr unsigned kCascade = 1u << 4;        // second array in the loop
inline constexpr unsigned kInverter = 1u << 5;       // analog inverter stage
inline constexpr unsigned kLambda = 1u << 6;         // lambda feedback conductance
inline constexpr unsigned kToAdc = 1u << 7;          // outputs routed to ADCs

inline constexpr unsigned pattern(Topology t) {
    switch (t) {
        case Topology::MVM: return kDacToRows | kTiaFeedback | kToAdc;
        case Topology::INV: return kArrayFeedback | kCurrentInject | kToAdc;
        case Topology::PINV: return kArrayFeedback | kCurrentInject | kCascade | kInverter | kToAdc;
        case Topology::EGV: return kTiaFeedback | kArrayFeedback | kInverter | kLambda | kToAdc;
    }
    return 0;
}
}  // namespace gate

/// 8 gate bits followed by three IEEE-754 payload words
/// (tia_gain, lambda, v_rail), least significant bit first.
inline constexpr std::size_t kRegisterWidth = 8 + 3 * 64;
using RegisterBits = std::bitset<kRegisterWidth>;

struct TopologyConfig {
    Topology kind = Topology::MVM;
    double tia_gain = 1e4;  // ohms
    double lambda = 0.0;    // EGV only, problem units
    double v_rail = 1.0;    // volts, symmetric
    RegisterBits register_bits;

    friend bool operator==(const TopologyConfig& a, const TopologyConfig& b) {
        return a.kind == b.kind && a.tia_gain == b.tia_gain && a.lambda == b.lambda &&
               a.v_rail == b.v_rail && a.register_bits == b.register_bits;
    }
};

namespace detail {

inline void put_word(RegisterBits& bits, std::size_t offset, double value) {
    const auto word = std::bit_cast<std::uint64_t>(value);
    for (std::size_t k = 0; k < 64; ++k) bits[offset + k] = ((word >> k) & 1u) != 0;
}

inline double get_word(const RegisterBits& bits, std::size_t offset) {
    std::uint64_t word = 0;
    for (std::size_t k = 0; k < 64; ++k) word |= static_cast<std::uint64_t>(bits[offset + k]) << k;
    return std::bit_cast<double>(word);
}

}  // namespace detail

/// Builds the register image. lambda is only stored for EGV.
inline RegisterBits encode_topology(Topology kind, double tia_gain, double lambda = 0.0, double v_rail = 1.0) {
    if (!(tia_gain > 0.0) || !std::isfinite(tia_gain)) throw DomainError("tia_gain must be finite and > 0");
    if (!(v_rail > 0.0) || !std::isfinite(v_rail)) throw DomainError("v_rail must be finite and > 0");
    if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
    RegisterBits bits;
    const unsigned gates = gate::pattern(kind);
    for (std::size_t k = 0; k < 8; ++k) bits[k] = ((gates >> k) & 1u) != 0;
    detail::put_word(bits, 8, tia_gain);
    detail::put_word(bits, 72, kind == Topology::EGV ? lambda : 0.0);
    detail::put_word(bits, 136, v_rail);
    return bits;
}

inline TopologyConfig make_topology(Topology kind, double tia_gain, double lambda = 0.0, double v_rail = 1.0) {
    TopologyConfig c;
    c.kind = kind;
    c.tia_gain = tia_gain;
    c.lambda = kind == Topology::EGV ? lambda : 0.0;
    c.v_rail = v_rail;
    c.register_bits = encode_topology(kind, tia_gain, c.lambda, v_rail);
    return c;
}

inline TopologyConfig decode_topology(const RegisterBits& bits) {
    unsigned gates = 0;
    for (std::size_t k = 0; k < 8; ++k) gates |= static_cast<unsigned>(bits[k]) << k;
    TopologyConfig c;
    bool matched = false;
    for (Topology t : {Topology::MVM, Topology::INV, Topology::PINV, Topology::EGV}) {
        if (gates == gate::pattern(t)) {
            c.kind = t;
            matched = true;
        }
    }
    if (!matched) throw DecodeError("register gate pattern matches no topology");
    c.tia_gain = detail::get_word(bits, 8);
    c.lambda = detail::get_word(bits, 72);
    c.v_rail = detail::get_word(bits, 136);
    if (!(c.tia_gain > 0.0) || !std::isfinite(c.tia_gain)) throw DecodeError("register: invalid tia_gain");
    if (!(c.v_rail > 0.0) || !std::isfinite(c.v_rail)) throw DecodeError("register: invalid v_rail");
    if (!std::isfinite(c.lambda) || (c.kind != Topology::EGV && c.lambda != 0.0)) {
        throw DecodeError("register: invalid lambda payload");
    }
    c.register_bits = bits;
    return c;
}

// -----------------------------------------------------------------------------
// Operands
// -----------------------------------------------------------------------------

/// A weighted stack of arrays seen as one effective conductance matrix,
/// sum_k w_k * G_k. Differential pairs use weights (+1, -1); bit slices
/// add (+16, -16) planes.
struct WeightedPlane {
    const CrossbarArray* array = nullptr;
    double weight = 1.0;
};

class PlaneStack {
public:
    PlaneStack() = default;
    PlaneStack(const CrossbarArray& a) : planes_{{&a, 1.0}} {}  // NOLINT: implicit by design of the API
    explicit PlaneStack(std::vector<WeightedPlane> planes) : planes_(std::move(planes)) {
        if (planes_.empty()) throw DomainError("plane stack is empty");
        for (const auto& p : planes_) {
            if (p.array == nullptr) throw DomainError("plane stack holds a null array");
            if (p.array->active_rows() != rows() || p.array->active_cols() != cols()) {
                throw DomainError("plane stack: active regions differ in shape");
            }
        }
    }

    [[nodiscard]] int rows() const { return planes_.front().array->active_rows(); }
    [[nodiscard]] int cols() const { return planes_.front().array->active_cols(); }
    [[nodiscard]] const std::vector<WeightedPlane>& planes() const { return planes_; }

    /// One noisy read per plane, in plane order.
    [[nodiscard]] Matrix read(Rng& rng) const {
        Matrix g = Matrix::Zero(rows(), cols());
        for (const auto& p : planes_) g += p.weight * p.array->read_conductance_matrix(rng);
        return g;
    }

    [[nodiscard]] Matrix nominal() const {
        Matrix g = Matrix::Zero(rows(), cols());
        for (const auto& p : planes_) g += p.weight * p.array->nominal_conductance_matrix();
        return g;
    }

    [[nodiscard]] bool noisy() const {
        for (const auto& p : planes_)
            if (p.array->params().sigma_read > 0.0) return true;
        return false;
    }

private:
    std::vector<WeightedPlane> planes_;
};

// -----------------------------------------------------------------------------
// Solvers
// -----------------------------------------------------------------------------

struct AnalogResult {
    Vector v_out;
    std::vector<bool> saturated;
    double condition_estimate = 1.0;
    bool noise_sampled = false;

    [[nodiscard]] bool any_saturated() const {
        for (bool s : saturated)
            if (s) return true;
        return false;
    }
};

namespace detail {

inline AnalogResult apply_rails(const Vector& raw, double v_rail) {
    AnalogResult r;
    r.v_out = raw;
    r.saturated.assign(static_cast<std::size_t>(raw.size()), false);
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        if (std::abs(raw[i]) > v_rail) {
            r.v_out[i] = raw[i] > 0 ? v_rail : -v_rail;
            r.saturated[static_cast<std::size_t>(i)] = true;
        }
    }
    return r;
}

inline void require_kind(const TopologyConfig& cfg, Topology kind) {
    if (cfg.kind != kind) {
        throw ConfigurationError("macro configured as " + std::string(to_string(cfg.kind)) + ", solve needs " +
                                 std::string(to_string(kind)));
    }
}

/// LU solve with the pivot screen: |u_ii| < 1e-12 * max|a_ij| is singular.
inline Vector checked_solve(const Matrix& a, const Vector& rhs, double* rcond_inv) {
    const double scale = a.cwiseAbs().maxCoeff();
    Eigen::PartialPivLU<Matrix> lu(a);
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(scale > 0.0) || !(min_pivot >= 1e-12 * scale)) {
        throw SingularMatrix("matrix is numerically singular (pivot " + std::to_string(min_pivot) + ")");
    }
    if (rcond_inv != nullptr) {
        const double rc = lu.rcond();
        *rcond_inv = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    }
    return lu.solve(rhs);
}

}  // namespace detail

/// Batched MVM: each row of `inputs` is one evaluation with a fresh read.
/// Returns the pre-rail outputs as rows.
inline Matrix mvm_raw_batch(const PlaneStack& op, const Matrix& inputs, const TopologyConfig& cfg, Rng& rng) {
    detail::require_kind(cfg, Topology::MVM);
    if (inputs.cols() != op.rows()) {
        throw DomainError("MVM input length " + std::to_string(inputs.cols()) + " does not match active rows " +
                          std::to_string(op.rows()));
    }
    Matrix out(inputs.rows(), op.cols());
    for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
        const Matrix g = op.read(rng);
        out.row(k) = -cfg.tia_gain * column_currents(g, inputs.row(k).transpose()).transpose();
    }
    return out;
}

inline AnalogResult solve_mvm(const PlaneStack& op, const Vector& v_in, const TopologyConfig& cfg, Rng& rng) {
    const Matrix raw = mvm_raw_batch(op, v_in.transpose(), cfg, rng);
    AnalogResult r = detail::apply_rails(raw.row(0).transpose(), cfg.v_rail);
    r.noise_sampled = op.noisy();
    return r;
}

/// `b` in volts, injected as currents b / R_f.
inline AnalogResult solve_inv(const PlaneStack& op, const Vector& b, const TopologyConfig& cfg, Rng& rng) {
    detail::require_kind(cfg, Topology::INV);
    if (op.rows() != op.cols()) throw DomainError("INV needs a square active region");
    if (b.size() != op.rows()) throw DomainError("INV input length does not match the matrix");
    const Matrix a = cfg.tia_gain * op.read(rng);
    double cond = 0.0;
    const Vector v = detail::checked_solve(a, -b, &cond);
    AnalogResult r = detail::apply_rails(v, cfg.v_rail);
    r.condition_estimate = cond;
    r.noise_sampled = op.noisy();
    return r;
}

/// Two-array cascade: `op_a` holds A (m x n), `op_at` holds A^T (n x m).
inline AnalogResult solve_pinv(const PlaneStack& op_a, const PlaneStack& op_at, const Vector& b,
                               const TopologyConfig& cfg, Rng& rng) {
    detail::require_kind(cfg, Topology::PINV);
    const int m = op_a.rows();
    const int n = op_a.cols();
    if (op_at.rows() != n || op_at.cols() != m) throw DomainError("PINV: transpose array has the wrong shape");
    if (m < n) throw DomainError("PINV needs rows >= cols");
    if (b.size() != m) throw DomainError("PINV input length does not match the matrix rows");
    const Matrix a = cfg.tia_gain * op_a.read(rng);
    const Matrix at = cfg.tia_gain * op_at.read(rng);
    const Matrix normal = at * a;
    double cond = 0.0;
    const Vector x = detail::checked_solve(normal, at * b, &cond);
    AnalogResult r = detail::apply_rails(x, cfg.v_rail);
    r.condition_estimate = cond;
    r.noise_sampled = op_a.noisy() || op_at.noisy();
    return r;
}

/// Eigenvector for the supplied lambda: the right singular vector of
/// (R_f G - lambda I) with the smallest singular value, scaled so its
/// largest-magnitude entry is +1. condition_estimate carries the residual
/// ||(R_f G - lambda I) v|| / ||v||.
inline AnalogResult solve_egv(const PlaneStack& op, const TopologyConfig& cfg, Rng& rng) {
    detail::require_kind(cfg, Topology::EGV);
    if (op.rows() != op.cols()) throw DomainError("EGV needs a square active region");
    const Matrix a = cfg.tia_gain * op.read(rng);
    const Eigen::Index n = a.rows();
    const Matrix shifted = a - cfg.lambda * Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(shifted, Eigen::ComputeFullV);
    const double sigma_min = svd.singularValues()(n - 1);
    const double norm_a = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
    if (sigma_min > 0.05 * norm_a) {
        throw NotAnEigenvalue("lambda is not near the spectrum (smallest singular value " +
                              std::to_string(sigma_min) + ")");
    }
    Vector v = svd.matrixV().col(n - 1);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v /= v[imax];
    AnalogResult r = detail::apply_rails(v, cfg.v_rail);
    r.condition_estimate = (shifted * v).norm() / v.norm();
    r.noise_sampled = op.noisy();
    return r;
}

// -----------------------------------------------------------------------------
// Pre-flight screen
// -----------------------------------------------------------------------------

struct Diagnostics {
    double condition_estimate = 1.0;
    double predicted_max_output = 0.0;  // volts for inputs of amplitude v_max
    bool saturation_predicted = false;
    bool ill_conditioned = false;       // condition > 1e6
    bool stability_advisory = false;    // INV: symmetric part not positive definite
};

namespace detail {

inline double condition_1norm(const Matrix& a) {
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    const Matrix inv = lu.inverse();
    return a.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
}

inline double condition_2norm(const Matrix& a) {
    const Vector s = Eigen::JacobiSVD<Matrix>(a).singularValues();
    const double lo = s(s.size() - 1);
    return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Uses nominal (noise-free) conductances. `op_at` is only consulted for PINV.
inline Diagnostics check_feasibility(const PlaneStack& op, const TopologyConfig& cfg, double v_max = 1.0,
                                     const PlaneStack* op_at = nullptr) {
    Diagnostics d;
    const Matrix a = cfg.tia_gain * op.nominal();
    switch (cfg.kind) {
        case Topology::MVM: {
            d.condition_estimate = a.rows() == a.cols() ? detail::condition_1norm(a) : detail::condition_2norm(a);
            d.predicted_max_output = v_max * a.cwiseAbs().colwise().sum().maxCoeff();
            break;
        }
        case Topology::INV: {
            if (a.rows() != a.cols()) throw DomainError("INV needs a square active region");
            d.condition_estimate = detail::condition_1norm(a);
            Eigen::FullPivLU<Matrix> lu(a);
            d.predicted_max_output = lu.isInvertible()
                                         ? v_max * lu.inverse().cwiseAbs().rowwise().sum().maxCoeff()
                                         : std::numeric_limits<double>::infinity();
            const Matrix sym = 0.5 * (a + a.transpose());
            Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
            d.stability_advisory = !(es.eigenvalues().minCoeff() > 0.0);
            break;
        }
        case Topology::PINV: {
            const Matrix at = op_at != nullptr ? Matrix(cfg.tia_gain * op_at->nominal()) : Matrix(a.transpose());
            const Matrix normal = at * a;
            d.condition_estimate = detail::condition_1norm(normal);
            Eigen::FullPivLU<Matrix> lu(normal);
            d.predicted_max_output = lu.isInvertible()
                                         ? v_max * (lu.inverse() * at).cwiseAbs().rowwise().sum().maxCoeff()
                                         : std::numeric_limits<double>::infinity();
            break;
        }
        case Topology::EGV: {
            if (a.rows() != a.cols()) throw DomainError("EGV needs a square active region");
            d.condition_estimate = detail::condition_2norm(a - cfg.lambda * Matrix::Identity(a.rows(), a.cols()));
            d.predicted_max_output = 1.0;
            break;
        }
    }
    d.saturation_predicted = d.predicted_max_output > cfg.v_rail;
    d.ill_conditioned = d.condition_estimate > 1e6;
    return d;
}

}  // namespace gramc
