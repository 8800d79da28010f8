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

// Experiment harness: resolved configuration, matrix generators, the four
// validation pipelines (compiled to machine programs) and CNN inference.

#include "gramc/amc_core.hpp"
#include "gramc/common.hpp"
#include "gramc/digital.hpp"
#include "gramc/io.hpp"
#include "gramc/isa.hpp"
#include "gramc/machine.hpp"
#include "gramc/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gramc {

// -----------------------------------------------------------------------------
// Configuration
// -----------------------------------------------------------------------------

struct SimConfig {
    DeviceParams device;
    WriteVerifyConfig write_verify;
    ConverterSpec converters;
    double v_rail = 1.0;
    /// Fraction of the rail the gain calibration aims the largest output at.
    double output_swing = 0.5;
    int bits = 4;
    SignedMode signed_mode = SignedMode::Differential;
    /// Full-scale magnitude; <= 0 means max |entry| of the mapped matrix.
    double a_max = 0.0;
    WriteMode program_mode = WriteMode::Verify;
    bool noise = true;
    std::uint64_t seed = 1;
    int trials = 1;

    [[nodiscard]] int n_slices() const { return bits == 8 ? 2 : 1; }

    /// Device parameters with the noise toggle applied.
    [[nodiscard]] DeviceParams effective_device() const {
        DeviceParams d = device;
        if (!noise) {
            d.sigma_read = 0.0;
            d.sigma_write = 0.0;
        }
        return d;
    }

    [[nodiscard]] MachineConfig machine(std::uint64_t machine_seed) const {
        return MachineConfig{effective_device(), write_verify, converters, machine_seed};
    }

    void validate() const {
        if (bits != 4 && bits != 8) throw InputError("bits must be 4 or 8");
        if (trials < 1) throw InputError("trials must be >= 1");
        if (!(v_rail > 0.0)) throw InputError("amc.v_rail must be > 0");
        if (!(output_swing > 0.0 && output_swing <= 1.0)) throw InputError("amc.output_swing must be in (0, 1]");
        device.validate();
        converters.validate();
        write_verify.validate(device);
    }

    /// Applies every recognised key and rejects unknown ones.
    void apply(io::KeyValueConfig& kv) {
        kv.get("device.g_min", device.g_min);
        kv.get("device.g_max", device.g_max);
        kv.get("device.pulse_width", device.pulse_width);
        kv.get("device.v_set", device.v_set);
        kv.get("device.v_th_set", device.v_th_set);
        kv.get("device.v_th_reset", device.v_th_reset);
        kv.get("device.alpha_set", device.alpha_set);
        kv.get("device.alpha_reset", device.alpha_reset);
        kv.get("device.beta_set", device.beta_set);
        kv.get("device.beta_reset", device.beta_reset);
        kv.get("device.sigma_write", device.sigma_write);
        kv.get("device.sigma_read", device.sigma_read);
        kv.get("device.rng_seed", device.rng_seed);
        if (kv.has("wv.tol")) {
            double tol = 0.0;
            kv.get("wv.tol", tol);
            write_verify.tol = tol;
        }
        kv.get("wv.tol_fraction", write_verify.tol_fraction);
        kv.get("wv.max_pulses", write_verify.max_pulses);
        kv.get("wv.vg_start", write_verify.vg_start);
        kv.get("wv.vg_step", write_verify.vg_step);
        kv.get("wv.vg_max", write_verify.vg_max);
        kv.get("wv.vsl_start", write_verify.vsl_start);
        kv.get("wv.vsl_step", write_verify.vsl_step);
        kv.get("wv.vsl_max", write_verify.vsl_max);
        kv.get("converter.dac_bits", converters.dac_bits);
        kv.get("converter.adc_bits", converters.adc_bits);
        kv.get("converter.v_ref", converters.v_ref);
        kv.get("amc.v_rail", v_rail);
        kv.get("amc.output_swing", output_swing);
        kv.get("scheme.bits", bits);
        std::string mode(to_string(signed_mode));
        kv.get("scheme.signed_mode", mode);
        signed_mode = parse_signed_mode(mode);
        kv.get("scheme.a_max", a_max);
        std::string pm = program_mode == WriteMode::Verify ? "verify" : "ideal";
        kv.get("program.mode", pm);
        if (pm == "verify") program_mode = WriteMode::Verify;
        else if (pm == "ideal") program_mode = WriteMode::Ideal;
        else throw InputError("program.mode must be verify or ideal");
        kv.get("noise", noise);
        kv.get("seed", seed);
        kv.get("trials", trials);
        kv.reject_unconsumed();
        validate();
    }

    /// Every setting, defaults included, as "key = value" lines.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> resolved() const {
        using io::format_number;
        const DeviceParams d = effective_device();
        std::vector<std::pair<std::string, std::string>> kv = {
            {"device.g_min", format_number(d.g_min)},
            {"device.g_max", format_number(d.g_max)},
            {"device.pulse_width", format_number(d.pulse_width)},
            {"device.v_set", format_number(d.v_set)},
            {"device.v_th_set", format_number(d.v_th_set)},
            {"device.v_th_reset", format_number(d.v_th_reset)},
            {"device.alpha_set", format_number(d.alpha_set)},
            {"device.alpha_reset", format_number(d.alpha_reset)},
            {"device.beta_set", format_number(d.beta_set)},
            {"device.beta_reset", format_number(d.beta_reset)},
            {"device.sigma_write", format_number(d.sigma_write)},
            {"device.sigma_read", format_number(d.sigma_read)},
            {"device.rng_seed", std::to_string(d.rng_seed)},
            {"wv.tol", format_number(write_verify.tolerance(d))},
            {"wv.tol_fraction", format_number(write_verify.tol_fraction)},
            {"wv.max_pulses", std::to_string(write_verify.max_pulses)},
            {"wv.vg_start", format_number(write_verify.vg_start)},
            {"wv.vg_step", format_number(write_verify.vg_step)},
            {"wv.vg_max", format_number(write_verify.vg_max)},
            {"wv.vsl_start", format_number(write_verify.vsl_start)},
            {"wv.vsl_step", format_number(write_verify.vsl_step)},
            {"wv.vsl_max", format_number(write_verify.vsl_max)},
            {"converter.dac_bits", std::to_string(converters.dac_bits)},
            {"converter.adc_bits", std::to_string(converters.adc_bits)},
            {"converter.v_ref", format_number(converters.v_ref)},
            {"amc.v_rail", format_number(v_rail)},
            {"amc.output_swing", format_number(output_swing)},
            {"scheme.bits", std::to_string(bits)},
            {"scheme.signed_mode", std::string(to_string(signed_mode))},
            {"scheme.a_max", a_max > 0.0 ? format_number(a_max) : std::string("auto")},
            {"program.mode", program_mode == WriteMode::Verify ? "verify" : "ideal"},
            {"noise", noise ? "on" : "off"},
            {"seed", std::to_string(seed)},
            {"trials", std::to_string(trials)},
        };
        return kv;
    }

    [[nodiscard]] std::string resolved_comment_block() const {
        std::string s;
        for (const auto& [k, v] : resolved()) s += "# " + k + " = " + v + "\n";
        return s;
    }
};

// -----------------------------------------------------------------------------
// Generators
// -----------------------------------------------------------------------------

enum class MatrixKind { Wishart, Gram, Regression };

inline MatrixKind parse_matrix_kind(std::string_view s) {
    if (s == "wishart") return MatrixKind::Wishart;
    if (s == "gram") return MatrixKind::Gram;
    if (s == "regression") return MatrixKind::Regression;
    throw InputError("unknown generator '" + std::string(s) + "'");
}

namespace detail {

inline Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = nd(rng);
    return x;
}

}  // namespace detail

struct RegressionProblem {
    Matrix design;      // m x n
    Vector coefficients;
    Vector response;    // design * coefficients + 0.1 * noise
};

inline RegressionProblem generate_regression(int m, int n, std::uint64_t seed) {
    if (m < 1 || n < 1 || m < n) throw InputError("regression(m, n) needs m >= n >= 1");
    Rng rng = make_stream(seed, 0);
    RegressionProblem p;
    p.design = detail::standard_normal_matrix(m, n, rng);
    p.coefficients = detail::standard_normal_matrix(n, 1, rng).col(0);
    const Vector noise = detail::standard_normal_matrix(m, 1, rng).col(0);
    p.response = p.design * p.coefficients + 0.1 * noise;
    return p;
}

/// wishart(n): X X^T / n with X n x n standard normal.
/// gram(n): Y Y^T with Y the row-normalized version of such an X.
/// regression(m, n): the m x n standard-normal design.
inline Matrix generate_matrix(MatrixKind kind, int rows, int cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1) throw InputError("generator dimensions must be >= 1");
    switch (kind) {
        case MatrixKind::Wishart: {
            Rng rng = make_stream(seed, 0);
            const Matrix x = detail::standard_normal_matrix(rows, rows, rng);
            const Matrix w = x * x.transpose() / static_cast<double>(rows);
            return 0.5 * (w + w.transpose());
        }
        case MatrixKind::Gram: {
            Rng rng = make_stream(seed, 0);
            Matrix y = detail::standard_normal_matrix(rows, rows, rng);
            for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i).normalize();
            Matrix g = y * y.transpose();
            g = 0.5 * (g + g.transpose());
            g.diagonal().setOnes();
            return g;
        }
        case MatrixKind::Regression: return generate_regression(rows, cols, seed).design;
    }
    return {};
}

// -----------------------------------------------------------------------------
// Error metric
// -----------------------------------------------------------------------------

struct ErrorStats {
    double median = 0.0;
    double mean = 0.0;
    int included = 0;
    std::vector<double> rel_errors;  // per component, NaN when excluded
};

/// Relative error over components with |reference| >= 1% of max |reference|.
inline ErrorStats relative_error_stats(const Vector& reference, const Vector& analog) {
    if (reference.size() != analog.size()) throw DomainError("error stats: length mismatch");
    ErrorStats s;
    const double cutoff = 0.01 * reference.cwiseAbs().maxCoeff();
    std::vector<double> kept;
    s.rel_errors.assign(static_cast<std::size_t>(reference.size()), std::nan(""));
    for (Eigen::Index i = 0; i < reference.size(); ++i) {
        if (std::abs(reference[i]) >= cutoff && reference[i] != 0.0) {
            const double e = std::abs(analog[i] - reference[i]) / std::abs(reference[i]);
            s.rel_errors[static_cast<std::size_t>(i)] = e;
            kept.push_back(e);
        }
    }
    s.included = static_cast<int>(kept.size());
    if (kept.empty()) return s;
    double sum = 0.0;
    for (double e : kept) sum += e;
    s.mean = sum / static_cast<double>(kept.size());
    std::sort(kept.begin(), kept.end());
    const std::size_t n = kept.size();
    s.median = n % 2 ? kept[n / 2] : 0.5 * (kept[n / 2 - 1] + kept[n / 2]);
    return s;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double cosine_similarity(const Vector& a, const Vector& b) {
    return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

// -----------------------------------------------------------------------------
// Validation pipelines
// -----------------------------------------------------------------------------

/// A compiled validation problem: machine program, initial global buffer and
/// the digital bookkeeping needed to turn RDO readouts into problem units.
struct CompiledSolve {
    Topology kind = Topology::MVM;
    Program setup;    // WRV instructions
    Program program;  // CFG, EXE, RDO
    BufferStore inputs;
    QuantizationScheme scheme;   // scale filled in
    std::vector<double> kappas;  // per EXE (MVM slices) or single
    std::vector<double> floor_gains;  // MVM, nonnegative mapping: R_f * g_min per EXE
    Vector driven;                    // MVM: the DAC-driven input volts
    double input_scale = 1.0;    // problem units per volt of the DAC input
    double lambda = 0.0;         // EGV, problem units
    std::vector<std::string> outputs;

    /// Both phases as one HALT-terminated program.
    [[nodiscard]] Program combined() const {
        Program p(setup.begin(), setup.end() - 1);
        p.insert(p.end(), program.begin(), program.end());
        return p;
    }
};

namespace detail {

inline double dac_top(const ConverterSpec& c) { return c.v_ref - converter_lsb(c.dac_bits, c.v_ref); }

inline double auto_a_max(const Matrix& a, double configured) {
    if (configured > 0.0) return configured;
    const double m = a.cwiseAbs().maxCoeff();
    return m > 0.0 ? m : 1.0;
}

inline Buffer level_buffer(const LevelMatrix& levels) { return Buffer::matrix(levels.cast<double>()); }

inline Instruction wrv(int macro, const std::string& src, WriteMode mode) {
    Instruction i;
    i.opcode = Opcode::WRV;
    i.macro = macro;
    i.src = src;
    i.write_mode = mode;
    return i;
}

inline Instruction cfg(int macro, Topology kind, double gain, double rail, std::vector<PlaneTerm> planes,
                       std::vector<PlaneTerm> tplanes = {}, double lambda = 0.0) {
    Instruction i;
    i.opcode = Opcode::CFG;
    i.macro = macro;
    i.kind = kind;
    i.gain = gain;
    i.rail = rail;
    i.lambda = kind == Topology::EGV ? lambda : 0.0;
    i.planes = std::move(planes);
    i.tplanes = std::move(tplanes);
    return i;
}

inline Instruction exe(int macro, const std::string& src) {
    Instruction i;
    i.opcode = Opcode::EXE;
    i.macro = macro;
    i.src = src;
    return i;
}

inline Instruction rdo(int macro, const std::string& dst) {
    Instruction i;
    i.opcode = Opcode::RDO;
    i.macro = macro;
    i.dst = dst;
    return i;
}

inline Instruction mov(const std::string& src, const std::string& dst, MovOp op, double factor = 1.0) {
    Instruction i;
    i.opcode = Opcode::MOV;
    i.src = src;
    i.dst = dst;
    i.mov_op = op;
    i.factor = factor;
    return i;
}

inline Instruction halt() { return Instruction{}; }

/// Loads the planes of `mm` as targets t<first>.. and emits one WRV each,
/// onto macros first, first+1, ...; returns the plane terms with weights.
inline std::vector<PlaneTerm> emit_planes(CompiledSolve& cs, const MappedMatrix& mm, int first, WriteMode mode) {
    std::vector<PlaneTerm> terms;
    for (std::size_t k = 0; k < mm.level_planes.size(); ++k) {
        const int macro = first + static_cast<int>(k);
        const std::string name = "t" + std::to_string(macro);
        cs.inputs[name] = level_buffer(mm.level_planes[k]);
        cs.setup.push_back(wrv(macro, name, mode));
        terms.push_back({macro, mm.plane_weight(k)});
    }
    return terms;
}

}  // namespace detail

/// Compiles one solve. `rhs` is x for MVM, b for INV/PINV and ignored for EGV.
/// Gains are calibrated on the reconstructed (digital twin) matrix so the
/// largest predicted output sits at output_swing * v_rail.
inline CompiledSolve compile_solve(Topology kind, const Matrix& a, const Vector& rhs, const SimConfig& cfg) {
    cfg.validate();
    CompiledSolve cs;
    cs.kind = kind;
    QuantizationScheme scheme;
    scheme.n_slices = cfg.n_slices();
    scheme.signed_mode = cfg.signed_mode;
    scheme.a_max = detail::auto_a_max(a, cfg.a_max);
    const DeviceParams dev = cfg.effective_device();
    const double target = cfg.output_swing * cfg.v_rail;
    const double top = detail::dac_top(cfg.converters);

    auto scaled_rhs = [&](const Vector& v) {
        const double m = v.cwiseAbs().maxCoeff();
        cs.input_scale = m > 0.0 ? m / top : 1.0;
        return Vector(v / cs.input_scale);
    };

    switch (kind) {
        case Topology::MVM: {
            if (rhs.size() != a.cols()) throw DomainError("MVM: x length does not match the matrix");
            const MappedMatrix mm = quantize_matrix(a.transpose(), scheme, dev);
            cs.scheme = mm.scheme;
            const Vector xv = scaled_rhs(rhs);
            cs.inputs["x"] = Buffer::vector(xv);
            cs.driven = dac_drive(Matrix(xv.transpose()), cfg.converters).row(0).transpose();
            const auto terms = detail::emit_planes(cs, mm, 0, cfg.program_mode);
            // one EXE per slice, positive and negative planes summed in the analog domain
            for (int s = 0; s < scheme.n_slices; ++s) {
                std::vector<PlaneTerm> slice_terms;
                Matrix slice_levels = Matrix::Zero(mm.rows, mm.cols);
                for (std::size_t k = 0; k < terms.size(); ++k) {
                    if (mm.roles[k].slice != s) continue;
                    slice_terms.push_back({terms[k].macro, static_cast<double>(mm.roles[k].sign)});
                    slice_levels += mm.roles[k].sign * mm.level_planes[k].cast<double>();
                }
                const double predicted = (slice_levels.transpose() * xv).cwiseAbs().maxCoeff() * scheme.quantum();
                const double kappa = predicted > 0.0 ? target / predicted : 1.0;
                cs.kappas.push_back(kappa);
                cs.floor_gains.push_back(scheme.signed_mode == SignedMode::Nonnegative
                                             ? kappa * mm.scheme.scale * dev.g_min
                                             : 0.0);
                const int macro = slice_terms.front().macro;
                cs.program.push_back(
                    detail::cfg(macro, Topology::MVM, kappa * mm.scheme.scale, cfg.v_rail, slice_terms));
            }
            int exe_index = 0;
            for (const auto& ins : std::vector<Instruction>(cs.program)) {
                if (ins.opcode != Opcode::CFG) continue;
                const std::string out = "out:y" + std::to_string(exe_index++);
                cs.program.push_back(detail::exe(ins.macro, "x"));
                cs.program.push_back(detail::rdo(ins.macro, out));
                cs.outputs.push_back(out);
            }
            break;
        }
        case Topology::INV: {
            if (scheme.signed_mode != SignedMode::Differential) throw DomainError("INV needs differential mapping");
            if (a.rows() != a.cols()) throw DomainError("INV needs a square matrix");
            if (rhs.size() != a.rows()) throw DomainError("INV: b length does not match the matrix");
            const MappedMatrix mm = quantize_matrix(a, scheme, dev);
            cs.scheme = mm.scheme;
            const Vector bv = scaled_rhs(rhs);
            cs.inputs["b"] = Buffer::vector(bv);
            const auto terms = detail::emit_planes(cs, mm, 0, cfg.program_mode);
            const Matrix twin = reconstruct_effective_matrix(mm);
            Eigen::FullPivLU<Matrix> lu(twin);
            double kappa = 1.0;
            if (lu.isInvertible()) {
                const double predicted = lu.solve(bv).cwiseAbs().maxCoeff();
                if (predicted > 0.0 && std::isfinite(predicted)) kappa = predicted / target;
            }
            cs.kappas.push_back(kappa);
            cs.program.push_back(detail::cfg(0, Topology::INV, kappa * mm.scheme.scale, cfg.v_rail, terms));
            cs.program.push_back(detail::exe(0, "b"));
            cs.program.push_back(detail::rdo(0, "out:y0"));
            cs.outputs.push_back("out:y0");
            break;
        }
        case Topology::PINV: {
            if (scheme.signed_mode != SignedMode::Differential) throw DomainError("PINV needs differential mapping");
            if (rhs.size() != a.rows()) throw DomainError("PINV: b length does not match the matrix rows");
            if (a.rows() < a.cols()) throw DomainError("PINV needs rows >= cols");
            const MappedMatrix mm = quantize_matrix(a, scheme, dev);
            const MappedMatrix mmt = quantize_matrix(a.transpose(), scheme, dev);
            cs.scheme = mm.scheme;
            const Vector bv = scaled_rhs(rhs);
            cs.inputs["b"] = Buffer::vector(bv);
            const auto terms = detail::emit_planes(cs, mm, 0, cfg.program_mode);
            const auto tterms =
                detail::emit_planes(cs, mmt, static_cast<int>(mm.level_planes.size()), cfg.program_mode);
            const Matrix twin = reconstruct_effective_matrix(mm);
            const Matrix normal = twin.transpose() * twin;
            Eigen::FullPivLU<Matrix> lu(normal);
            double kappa = 1.0;
            if (lu.isInvertible()) {
                const double predicted = lu.solve(twin.transpose() * bv).cwiseAbs().maxCoeff();
                if (predicted > 0.0 && std::isfinite(predicted)) kappa = predicted / target;
            }
            cs.kappas.push_back(kappa);
            cs.program.push_back(detail::cfg(0, Topology::PINV, kappa * mm.scheme.scale, cfg.v_rail, terms, tterms));
            cs.program.push_back(detail::exe(0, "b"));
            cs.program.push_back(detail::rdo(0, "out:y0"));
            cs.outputs.push_back("out:y0");
            break;
        }
        case Topology::EGV: {
            if (scheme.signed_mode != SignedMode::Differential) throw DomainError("EGV needs differential mapping");
            if (a.rows() != a.cols()) throw DomainError("EGV needs a square matrix");
            const MappedMatrix mm = quantize_matrix(a, scheme, dev);
            cs.scheme = mm.scheme;
            const auto terms = detail::emit_planes(cs, mm, 0, cfg.program_mode);
            // lambda is filled in by attach_egv_lambda once the planes are programmed
            cs.kappas.push_back(1.0);
            cs.program.push_back(detail::cfg(0, Topology::EGV, mm.scheme.scale, cfg.v_rail, terms, {}, 0.0));
            cs.program.push_back(detail::exe(0, ""));
            cs.program.push_back(detail::rdo(0, "out:y0"));
            cs.outputs.push_back("out:y0");
            break;
        }
    }
    cs.setup.push_back(detail::halt());
    cs.program.push_back(detail::halt());
    return cs;
}

/// Reads the programmed EGV planes back once (on a stream separate from the
/// macro's), rebuilds the effective matrix and runs power iteration on it.
/// The dominant eigenvalue goes into the CFG of the compiled program.
inline double attach_egv_lambda(CompiledSolve& cs, MachineState& st, std::uint64_t readback_seed) {
    if (cs.kind != Topology::EGV) throw DomainError("attach_egv_lambda: not an EGV solve");
    Instruction& c = cs.program.front();
    const PlaneStack stack = detail::make_stack(st, c.macro, c.planes);
    Rng rng = make_stream(readback_seed, 0);
    const Matrix reconstructed = c.gain * stack.read(rng);
    const PowerIterationResult pi = power_iteration(reconstructed, 5000, 1e-12);
    c.lambda = pi.lambda;
    cs.lambda = pi.lambda;
    return pi.lambda;
}

/// Converts RDO readouts back to problem units.
inline Vector decode_solve(const CompiledSolve& cs, const MachineState& st) {
    auto readout = [&](std::size_t k) -> Vector { return st.buffer(cs.outputs[k]).data.row(0).transpose(); };
    switch (cs.kind) {
        case Topology::MVM: {
            // v = -kappa * A_slice x_v; slices recombine as 16 * msb + lsb
            Vector y = Vector::Zero(readout(0).size());
            const int n = static_cast<int>(cs.outputs.size());
            for (int s = 0; s < n; ++s) {
                const double slice_weight = std::pow(16.0, n - 1 - s);
                const auto k = static_cast<std::size_t>(s);
                const Vector v = remove_conductance_floor(readout(k), cs.driven, cs.floor_gains[k], 1.0);
                y += slice_weight * (-v / cs.kappas[k]);
            }
            return y * cs.input_scale;
        }
        case Topology::INV: return -cs.kappas[0] * readout(0) * cs.input_scale;
        case Topology::PINV: return cs.kappas[0] * readout(0) * cs.input_scale;
        case Topology::EGV: return readout(0);
    }
    return {};
}

/// Float reference on the original matrix.
inline Vector numerical_reference(Topology kind, const Matrix& a, const Vector& rhs) {
    switch (kind) {
        case Topology::MVM: return a * rhs;
        case Topology::INV: return a.fullPivLu().solve(rhs);
        case Topology::PINV: return a.colPivHouseholderQr().solve(rhs);
        case Topology::EGV: {
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
            Vector v = es.eigenvectors().col(a.rows() - 1);
            Eigen::Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            return v / v[imax];
        }
    }
    return {};
}

struct TrialResult {
    std::string status = "ok";
    Vector numerical;
    Vector analog;
    ErrorStats stats;
    double cosine = std::nan("");   // EGV only
    double lambda = std::nan("");   // EGV only
    bool saturated = false;
};

struct ValidationReport {
    Topology kind = Topology::MVM;
    std::vector<TrialResult> trials;

    [[nodiscard]] double median_rel_error() const {
        std::vector<double> v;
        for (const auto& t : trials)
            if (t.status == "ok") v.push_back(t.stats.median);
        return median_of(v);
    }
    [[nodiscard]] double median_cosine() const {
        std::vector<double> v;
        for (const auto& t : trials)
            if (t.status == "ok") v.push_back(t.cosine);
        return median_of(v);
    }
};

/// One problem instance for trial t: matrix, right-hand side and the seed
/// of the machine that solves it.
struct ProblemInstance {
    Matrix a;
    Vector rhs;
    std::uint64_t machine_seed = 0;
};

inline ProblemInstance make_instance(Topology kind, MatrixKind gen, int rows, int cols, std::uint64_t seed, int trial) {
    const std::uint64_t base = splitmix64(seed + 0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(trial + 1));
    ProblemInstance p;
    p.machine_seed = splitmix64(base ^ 0xa5a5a5a5a5a5a5a5ULL);
    Rng rng = make_stream(base, 1);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    if (gen == MatrixKind::Regression) {
        const RegressionProblem r = generate_regression(rows, cols, base);
        p.a = r.design;
        p.rhs = r.response;
    } else {
        p.a = generate_matrix(gen, rows, cols, base);
        p.rhs = Vector(kind == Topology::MVM ? p.a.cols() : p.a.rows());
        for (Eigen::Index i = 0; i < p.rhs.size(); ++i) p.rhs[i] = ud(rng);
    }
    return p;
}

inline TrialResult run_trial(Topology kind, const Matrix& a, const Vector& rhs, const SimConfig& cfg,
                             std::uint64_t machine_seed) {
    TrialResult t;
    t.numerical = numerical_reference(kind, a, rhs);
    try {
        CompiledSolve cs = compile_solve(kind, a, rhs, cfg);
        MachineState st(cfg.machine(machine_seed));
        st.global_buffer = cs.inputs;
        run_program(st, cs.setup);
        if (kind == Topology::EGV) attach_egv_lambda(cs, st, splitmix64(machine_seed ^ 0x5bd1e995ULL));
        run_program(st, cs.program);
        t.analog = decode_solve(cs, st);
        for (const auto& mu : st.macros) {
            if (mu.latch_valid && mu.latch_saturated.size() > 0 && mu.latch_saturated.any()) t.saturated = true;
        }
        if (kind == Topology::EGV) {
            t.lambda = cs.lambda;
            t.cosine = cosine_similarity(t.numerical, t.analog);
            // align the analog vector's scale to the reference before elementwise errors
            const Vector ref_unit = t.numerical.normalized();
            Vector an_unit = t.analog.normalized();
            if (an_unit.dot(ref_unit) < 0) an_unit = -an_unit;
            t.analog = an_unit * t.numerical.norm();
        }
        t.stats = relative_error_stats(t.numerical, t.analog);
    } catch (const SingularMatrix& e) {
        t.status = std::string("SingularMatrix: ") + e.what();
    } catch (const NotAnEigenvalue& e) {
        t.status = std::string("NotAnEigenvalue: ") + e.what();
    }
    return t;
}

inline ValidationReport run_validation(Topology kind, MatrixKind gen, int rows, int cols, const SimConfig& cfg,
                                       const std::optional<Matrix>& fixed = std::nullopt,
                                       const std::optional<Vector>& fixed_rhs = std::nullopt) {
    ValidationReport rep;
    rep.kind = kind;
    for (int t = 0; t < cfg.trials; ++t) {
        ProblemInstance p = make_instance(kind, gen, rows, cols, cfg.seed, t);
        if (fixed) {
            p.a = *fixed;
            if (fixed_rhs) {
                p.rhs = *fixed_rhs;
            } else {
                Rng rng = make_stream(p.machine_seed, 7);
                std::uniform_real_distribution<double> ud(-1.0, 1.0);
                p.rhs = Vector(kind == Topology::MVM ? p.a.cols() : p.a.rows());
                for (Eigen::Index i = 0; i < p.rhs.size(); ++i) p.rhs[i] = ud(rng);
            }
        }
        rep.trials.push_back(run_trial(kind, p.a, p.rhs, cfg, p.machine_seed));
    }
    return rep;
}

inline std::string format_validation_csv(const ValidationReport& rep, const SimConfig& cfg,
                                         const std::string& source) {
    using io::format_number;
    std::ostringstream os;
    os << "# experiment = " << to_string(rep.kind) << "\n";
    os << "# matrix = " << source << "\n";
    os << cfg.resolved_comment_block();
    os << "trial,index,numerical,analog,rel_error,included\n";
    for (std::size_t t = 0; t < rep.trials.size(); ++t) {
        const TrialResult& tr = rep.trials[t];
        if (tr.status != "ok") continue;
        for (Eigen::Index i = 0; i < tr.numerical.size(); ++i) {
            const double e = tr.stats.rel_errors[static_cast<std::size_t>(i)];
            os << t << ',' << i << ',' << format_number(tr.numerical[i]) << ',' << format_number(tr.analog[i])
               << ',' << (std::isnan(e) ? std::string("") : format_number(e)) << ',' << (std::isnan(e) ? 0 : 1)
               << '\n';
        }
    }
    for (std::size_t t = 0; t < rep.trials.size(); ++t) {
        const TrialResult& tr = rep.trials[t];
        os << "# summary trial=" << t << " status=" << (tr.status == "ok" ? "ok" : tr.status);
        if (tr.status == "ok") {
            os << " median_rel_error=" << format_number(tr.stats.median)
               << " mean_rel_error=" << format_number(tr.stats.mean) << " included=" << tr.stats.included
               << " saturated=" << (tr.saturated ? 1 : 0);
            if (rep.kind == Topology::EGV) {
                os << " cosine=" << format_number(tr.cosine) << " lambda=" << format_number(tr.lambda);
            }
        }
        os << "\n";
    }
    os << "# summary overall median_rel_error=" << format_number(rep.median_rel_error());
    if (rep.kind == Topology::EGV) os << " median_cosine=" << format_number(rep.median_cosine());
    os << "\n";
    return os.str();
}

// -----------------------------------------------------------------------------
// CNN inference
// -----------------------------------------------------------------------------

/// Shapes of one layer as it runs on 28x28 single-channel inputs.
struct LayerGeometry {
    io::LayerKind kind = io::LayerKind::Fc;
    int in_channels = 1;
    int in_h = 1;
    int in_w = 1;
    int kernel = 1;
    int out_h = 1;  // before pooling
    int out_w = 1;
    int fan_in = 0;
    int out = 0;
    bool flatten_before = false;
    bool last = false;
};

/// Checks that consecutive layers compose on an h x w single-channel input.
inline std::vector<LayerGeometry> network_geometry(const io::WeightsFile& wf, int h = 28, int w = 28) {
    if (wf.layers.empty()) throw InputError("weights file has no layers");
    std::vector<LayerGeometry> geo;
    int channels = 1;
    bool spatial = true;
    int features = 0;
    for (std::size_t l = 0; l < wf.layers.size(); ++l) {
        const io::Layer& layer = wf.layers[l];
        LayerGeometry g;
        g.kind = layer.kind;
        g.out = layer.out_features();
        g.fan_in = layer.fan_in();
        g.last = l + 1 == wf.layers.size();
        if (layer.kind == io::LayerKind::Conv) {
            if (!spatial) throw DomainError("conv layer after a fully connected layer");
            if (layer.in_channels() != channels) throw DomainError("conv layer channel count does not compose");
            g.in_channels = channels;
            g.in_h = h;
            g.in_w = w;
            g.kernel = layer.kernel();
            g.out_h = h - g.kernel + 1;
            g.out_w = w - g.kernel + 1;
            if (g.out_h < 2 || g.out_w < 2 || g.out_h % 2 || g.out_w % 2) {
                throw DomainError("conv output is not poolable (odd or empty map)");
            }
            if (g.last) throw DomainError("network must end with a fully connected layer");
            channels = g.out;
            h = g.out_h / 2;
            w = g.out_w / 2;
        } else {
            if (spatial) {
                g.flatten_before = true;
                features = channels * h * w;
                spatial = false;
            }
            if (layer.in_channels() != features) throw DomainError("fc layer fan-in does not compose");
            features = g.out;
        }
        if (g.fan_in > CrossbarArray::kRows || 2 * g.out > CrossbarArray::kCols) {
            throw DomainError("layer " + std::to_string(l) +
                              " does not fit one 128x128 array; tiling across macros is not supported");
        }
        geo.push_back(g);
    }
    return geo;
}

/// Float forward pass with explicit per-layer weights (out x fan_in).
inline Vector forward_pass(const std::vector<LayerGeometry>& geo, const std::vector<Matrix>& weights,
                           const std::vector<Vector>& biases, const Matrix& image) {
    Matrix act = flatten_map(image);  // channel rows
    Vector vec;
    for (std::size_t l = 0; l < geo.size(); ++l) {
        const LayerGeometry& g = geo[l];
        if (g.kind == io::LayerKind::Conv) {
            const Matrix patches = detail::im2col(act, g.kernel, g.in_h, g.in_w);
            Matrix y = (patches * weights[l].transpose()).rowwise() + biases[l].transpose();
            const Matrix maps = relu(Matrix(y.transpose()));  // out x positions
            Matrix pooled(maps.rows(), (g.out_h / 2) * (g.out_w / 2));
            for (Eigen::Index c = 0; c < maps.rows(); ++c) {
                const Matrix fm = unflatten_map(maps.row(c), g.out_h, g.out_w);
                const Matrix p = max_pool_2x2(fm);
                pooled.row(c) = flatten_map(p);
            }
            act = pooled;
        } else {
            if (g.flatten_before) vec = flatten_map(act).transpose();
            vec = weights[l] * vec + biases[l];
            if (!g.last) vec = relu(vec);
        }
    }
    return vec;
}

inline Vector float_forward(const io::WeightsFile& wf, const Matrix& image) {
    const auto geo = network_geometry(wf, static_cast<int>(image.rows()), static_cast<int>(image.cols()));
    std::vector<Matrix> w;
    std::vector<Vector> b;
    for (const auto& layer : wf.layers) {
        w.push_back(layer.weight_matrix());
        b.push_back(layer.bias_vector());
    }
    return forward_pass(geo, w, b, image);
}

inline QuantizationScheme layer_scheme(const io::Layer& layer, int bits, const DeviceParams& device) {
    QuantizationScheme s;
    s.n_slices = bits == 8 ? 2 : 1;
    s.signed_mode = SignedMode::Differential;
    s.a_max = detail::auto_a_max(layer.weight_matrix(), 0.0);
    s.scale = s.quantum() / device.level_spacing();
    return s;
}

/// Digital forward pass with weights replaced by their quantized values.
inline Vector quantized_forward(const io::WeightsFile& wf, const Matrix& image, int bits,
                                const DeviceParams& device = {}) {
    const auto geo = network_geometry(wf, static_cast<int>(image.rows()), static_cast<int>(image.cols()));
    std::vector<Matrix> w;
    std::vector<Vector> b;
    for (const auto& layer : wf.layers) {
        const MappedMatrix mm = quantize_matrix(layer.weight_matrix(), layer_scheme(layer, bits, device), device);
        w.push_back(reconstruct_effective_matrix(mm));
        b.push_back(layer.bias_vector());
    }
    return forward_pass(geo, w, b, image);
}

/// Network compiled onto the machine: a programming pass run once and an
/// inference pass run per image (input in global buffer "a0", logits in
/// output buffer "logits").
struct CompiledNetwork {
    std::vector<LayerGeometry> geometry;
    Program setup;
    Program infer;
    BufferStore constants;
    int macros_used = 0;
};

inline CompiledNetwork compile_network(const io::WeightsFile& wf, const SimConfig& cfg) {
    cfg.validate();
    CompiledNetwork net;
    net.geometry = network_geometry(wf);
    const DeviceParams dev = cfg.effective_device();
    const double top = detail::dac_top(cfg.converters);
    const int n_slices = cfg.n_slices();
    int macro = 0;
    Program& p = net.infer;

    for (std::size_t l = 0; l < wf.layers.size(); ++l) {
        const io::Layer& layer = wf.layers[l];
        const LayerGeometry& g = net.geometry[l];
        const std::string L = std::to_string(l);
        const QuantizationScheme scheme = layer_scheme(layer, cfg.bits, dev);
        const MappedMatrix mm = quantize_matrix(layer.weight_matrix().transpose(), scheme, dev);
        const double x_scale = static_cast<double>(layer.input_scale) / top;

        std::string src = "a" + L;
        if (g.kind == io::LayerKind::Conv) {
            Instruction i = detail::mov(src, "p" + L, MovOp::Im2col);
            i.k = g.kernel;
            i.h = g.in_h;
            i.w = g.in_w;
            p.push_back(i);
            src = "p" + L;
        } else if (g.flatten_before) {
            p.push_back(detail::mov(src, "f" + L, MovOp::Flatten));
            src = "f" + L;
        }
        p.push_back(detail::mov(src, "v" + L, MovOp::Scale, 1.0 / x_scale));

        for (int s = 0; s < n_slices; ++s) {
            if (macro >= kMacroCount) throw DomainError("network needs more than 16 macros");
            // positive and negative planes of this slice side by side
            LevelMatrix targets(mm.rows, 2 * mm.cols);
            targets.leftCols(mm.cols) = mm.level_planes[static_cast<std::size_t>(s)];
            targets.rightCols(mm.cols) = mm.level_planes[static_cast<std::size_t>(n_slices + s)];
            Matrix g_nominal(targets.rows(), targets.cols());
            for (Eigen::Index i = 0; i < targets.rows(); ++i)
                for (Eigen::Index j = 0; j < targets.cols(); ++j)
                    g_nominal(i, j) = level_to_conductance(LevelCode(targets(i, j)), dev);
            // worst case: every input at the top DAC code
            const double column_bound = g_nominal.colwise().sum().maxCoeff() * top;
            const double gain = cfg.output_swing * cfg.v_rail / column_bound;

            const std::string t = "w" + L + "_" + std::to_string(s);
            net.constants[t] = detail::level_buffer(targets);
            net.setup.push_back(detail::wrv(macro, t, cfg.program_mode));
            net.setup.push_back(detail::cfg(macro, Topology::MVM, gain, cfg.v_rail, {}));

            const std::string r = "r" + L + "_" + std::to_string(s);
            const std::string d = "d" + L + "_" + std::to_string(s);
            p.push_back(detail::exe(macro, "v" + L));
            p.push_back(detail::rdo(macro, r));
            p.push_back(detail::mov(r, d, MovOp::Diff));
            // v_pos - v_neg = -gain * spacing * (codes^T v); back to activations
            const double slice_weight = std::pow(16.0, n_slices - 1 - s);
            const double f = -slice_weight * scheme.quantum() * x_scale / (gain * dev.level_spacing());
            p.push_back(detail::mov(d, "y" + L, s == 0 ? MovOp::Scale : MovOp::Axpy, f));
            ++macro;
        }
        net.constants["b" + L] = Buffer::vector(layer.bias_vector());
        Instruction bias = detail::mov("y" + L, "z" + L, MovOp::Bias);
        bias.src2 = "b" + L;
        p.push_back(bias);

        const std::string next = "a" + std::to_string(l + 1);
        if (g.kind == io::LayerKind::Conv) {
            p.push_back(detail::mov("z" + L, "c" + L, MovOp::Transpose));
            Instruction act;
            act.opcode = Opcode::ACT;
            act.src = "c" + L;
            act.dst = "q" + L;
            p.push_back(act);
            Instruction pool;
            pool.opcode = Opcode::POOL;
            pool.src = "q" + L;
            pool.dst = next;
            pool.h = g.out_h;
            pool.w = g.out_w;
            p.push_back(pool);
        } else if (!g.last) {
            Instruction act;
            act.opcode = Opcode::ACT;
            act.src = "z" + L;
            act.dst = next;
            p.push_back(act);
        } else {
            p.push_back(detail::mov("z" + L, "out:logits", MovOp::Copy));
        }
    }
    net.macros_used = macro;
    net.setup.push_back(detail::halt());
    net.infer.push_back(detail::halt());
    return net;
}

/// Programs every macro of a compiled network.
inline void load_network(MachineState& st, const CompiledNetwork& net) {
    for (const auto& [name, buf] : net.constants) st.global_buffer[name] = buf;
    run_program(st, net.setup);
}

/// Runs one image; the machine's macro streams are reseeded from
/// (seed, image index) so images are independent of visiting order.
inline Vector infer_image(MachineState& st, const CompiledNetwork& net, const Matrix& image, std::uint64_t seed,
                          std::uint64_t index) {
    st.reseed(seed, index);
    st.global_buffer["a0"] = Buffer::matrix(flatten_map(image));
    run_program(st, net.infer);
    return st.buffer("out:logits").data.row(0).transpose();
}

inline int argmax(const Vector& v) {
    Eigen::Index k = 0;
    v.maxCoeff(&k);
    return static_cast<int>(k);
}

struct NnResult {
    int images = 0;
    int correct_analog = 0;
    int correct_float = 0;
    std::vector<int> labels;
    std::vector<int> predicted_analog;
    std::vector<int> predicted_float;
    int macros_used = 0;

    [[nodiscard]] double accuracy_analog() const { return images ? double(correct_analog) / images : 0.0; }
    [[nodiscard]] double accuracy_float() const { return images ? double(correct_float) / images : 0.0; }
};

inline NnResult nn_infer(const io::WeightsFile& wf, const io::IdxImages& images, const std::vector<int>& labels,
                         const SimConfig& cfg, int limit = 1000) {
    if (static_cast<int>(labels.size()) != images.count) throw InputError("label count does not match image count");
    if (images.rows != 28 || images.cols != 28) throw InputError("images must be 28x28");
    const CompiledNetwork net = compile_network(wf, cfg);
    MachineState st(cfg.machine(cfg.seed));
    load_network(st, net);

    NnResult r;
    r.macros_used = net.macros_used;
    r.images = limit > 0 ? std::min(limit, images.count) : images.count;
    for (int k = 0; k < r.images; ++k) {
        const Matrix img = images.image(k);
        const int a = argmax(infer_image(st, net, img, cfg.seed, static_cast<std::uint64_t>(k)));
        const int f = argmax(float_forward(wf, img));
        const int y = labels[static_cast<std::size_t>(k)];
        r.labels.push_back(y);
        r.predicted_analog.push_back(a);
        r.predicted_float.push_back(f);
        r.correct_analog += a == y;
        r.correct_float += f == y;
    }
    return r;
}

inline std::string format_nn_csv(const NnResult& r, const SimConfig& cfg, const std::string& source) {
    using io::format_number;
    std::ostringstream os;
    os << "# experiment = nn-infer\n# weights = " << source << "\n" << cfg.resolved_comment_block();
    os << "image,label,analog,float\n";
    for (int k = 0; k < r.images; ++k) {
        const auto i = static_cast<std::size_t>(k);
        os << k << ',' << r.labels[i] << ',' << r.predicted_analog[i] << ',' << r.predicted_float[i] << '\n';
    }
    os << "# summary images=" << r.images << " macros=" << r.macros_used
       << " accuracy_analog=" << format_number(r.accuracy_analog())
       << " accuracy_float=" << format_number(r.accuracy_float()) << '\n';
    return os.str();
}

// -----------------------------------------------------------------------------
// Programming demo
// -----------------------------------------------------------------------------

struct ProgramDemoResult {
    LevelMatrix targets;
    ArrayProgramReport report;
    Matrix nominal;  // noise-free read-back of the programmed region
};

/// Writes `cells_per_level` cells of each of the 16 levels through the
/// write-verify loop. Cell k holds level k / cells_per_level.
inline ProgramDemoResult program_demo(const SimConfig& cfg, int cells_per_level = 256) {
    cfg.validate();
    const int total = LevelCode::kCount * cells_per_level;
    if (cells_per_level < 1 || total > CrossbarArray::kRows * CrossbarArray::kCols) {
        throw InputError("program-demo: cells per level must be in 1..1024");
    }
    const int cols = std::min(total, CrossbarArray::kCols);
    const int rows = (total + cols - 1) / cols;
    if (rows * cols != total) throw InputError("program-demo: cell count must fill whole rows");
    ProgramDemoResult r;
    r.targets.resize(rows, cols);
    for (int k = 0; k < total; ++k) r.targets(k / cols, k % cols) = k / cells_per_level;
    CrossbarArray array(cfg.effective_device());
    array.set_region(ActiveRegion{0, rows, 0, cols});
    r.report = program_array(array, r.targets, cfg.write_verify, cfg.seed);
    r.nominal = array.nominal_conductance_matrix();
    return r;
}

inline std::string format_program_demo_csv(const ProgramDemoResult& r, const SimConfig& cfg) {
    using io::format_number;
    std::ostringstream os;
    os << "# experiment = program-demo\n" << cfg.resolved_comment_block();
    os << "row,col,target_level,target_g,final_g,nominal_g,pulses_used,success\n";
    for (int i = 0; i < r.report.rows; ++i) {
        for (int j = 0; j < r.report.cols; ++j) {
            const ProgramReport& c = r.report.at(i, j);
            os << i << ',' << j << ',' << r.targets(i, j) << ',' << format_number(c.target_g) << ','
               << format_number(c.final_g) << ',' << format_number(r.nominal(i, j)) << ',' << c.pulses_used << ','
               << (c.success ? 1 : 0) << '\n';
        }
    }
    os << "# summary cells=" << r.report.cells.size() << " success_rate=" << format_number(r.report.success_rate())
       << " total_pulses=" << r.report.total_pulses() << '\n';
    return os.str();
}

/// Conductance staircase under a fixed-step ramp with no verify, starting
/// from the given device state variable. Columns: pulse, voltage, g.
inline std::string format_pulse_sweep_csv(const SimConfig& cfg, PulseKind kind, const std::vector<double>& starts) {
    using io::format_number;
    const DeviceParams dev = cfg.effective_device();
    const WriteVerifyConfig& wv = cfg.write_verify;
    std::ostringstream os;
    os << "# experiment = pulse-sweep\n" << cfg.resolved_comment_block();
    os << "start_x,pulse,voltage,g\n";
    for (std::size_t k = 0; k < starts.size(); ++k) {
        Rng rng = make_stream(cfg.seed, k);
        DeviceState s = make_state(starts[k], dev);
        const double v0 = kind == PulseKind::Set ? wv.vg_start : wv.vsl_start;
        const double dv = kind == PulseKind::Set ? wv.vg_step : wv.vsl_step;
        const double vmax = kind == PulseKind::Set ? wv.vg_max : wv.vsl_max;
        double v = v0;
        os << format_number(starts[k]) << ",0,0," << format_number(s.g) << '\n';
        for (int n = 1; n <= wv.max_pulses && v <= vmax + 1e-12; ++n, v += dv) {
            s = kind == PulseKind::Set ? apply_set_pulse(s, v, dev, rng) : apply_reset_pulse(s, v, dev, rng);
            os << format_number(starts[k]) << ',' << n << ',' << format_number(v) << ',' << format_number(s.g) << '\n';
        }
    }
    return os.str();
}

// -----------------------------------------------------------------------------
// Buffer dump
// -----------------------------------------------------------------------------

/// CSV dump: a `name,rows,cols` header, then per buffer one such line
/// followed by its rows. Buffers appear in name order.
inline std::string format_buffer_dump(const BufferStore& store, const std::string& prefix = "") {
    std::ostringstream os;
    os << "name,rows,cols\n";
    for (const auto& [name, buf] : store) {
        os << prefix << name << ',' << buf.data.rows() << ',' << buf.data.cols() << '\n';
        for (Eigen::Index i = 0; i < buf.data.rows(); ++i) {
            for (Eigen::Index j = 0; j < buf.data.cols(); ++j) {
                if (j) os << ',';
                os << io::format_number(buf.data(i, j));
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace gramc
