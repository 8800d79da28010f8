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

// The digital control module and its 16 AMC macros.
//
// Write-verify path:  WRV (targets from the global buffer) and CMP.
// Solution path:      CFG (register array) -> EXE (DAC -> analog solve)
//                     -> RDO (ADC -> output buffer).
// Digital units:      MOV, POOL, ACT.

#include "gramc/amc_core.hpp"
#include "gramc/common.hpp"
#include "gramc/crossbar_array.hpp"
#include "gramc/digital.hpp"
#include "gramc/isa.hpp"
#include "gramc/write_verify.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gramc {

struct Buffer {
    Matrix data;             // vectors are stored as one row
    bool is_vector = false;

    static Buffer vector(const Vector& v) { return Buffer{v.transpose(), true}; }
    static Buffer matrix(Matrix m) { return Buffer{std::move(m), false}; }
};

using BufferStore = std::map<std::string, Buffer, std::less<>>;

struct MachineConfig {
    DeviceParams device;
    WriteVerifyConfig write_verify;
    ConverterSpec converters;
    std::uint64_t seed = 1;
};

struct MacroUnit {
    CrossbarArray array;
    std::optional<TopologyConfig> config;
    RegisterBits register_bits;
    std::vector<PlaneTerm> planes;
    std::vector<PlaneTerm> tplanes;
    Rng rng;

    // analog output latch, read by RDO
    Matrix latch;
    BoolMatrix latch_saturated;
    bool latch_valid = false;
    bool latch_vector = false;
    double latch_condition = 1.0;

    ArrayProgramReport last_report;
};

class MachineState {
public:
    explicit MachineState(MachineConfig cfg = {}) : config_(std::move(cfg)) {
        config_.device.validate();
        config_.converters.validate();
        config_.write_verify.validate(config_.device);
        macros.reserve(kMacroCount);
        for (int m = 0; m < kMacroCount; ++m) {
            macros.push_back(MacroUnit{CrossbarArray(config_.device), std::nullopt, {}, {}, {},
                                       make_stream(config_.seed, static_cast<std::uint64_t>(m)), {}, {}, false,
                                       false, 1.0, {}});
        }
    }

    /// Reseeds every macro stream from (seed, instance): macro m gets
    /// make_stream(seed, instance * 16 + m). Batch runs call this per
    /// instance so serial and parallel execution agree.
    void reseed(std::uint64_t seed, std::uint64_t instance) {
        for (int m = 0; m < kMacroCount; ++m) {
            macros[static_cast<std::size_t>(m)].rng =
                make_stream(seed, instance * kMacroCount + static_cast<std::uint64_t>(m));
        }
    }

    [[nodiscard]] const MachineConfig& config() const { return config_; }

    std::vector<MacroUnit> macros;
    BufferStore global_buffer;
    BufferStore output_buffer;
    std::size_t pc = 0;
    bool halted = false;

    [[nodiscard]] const Buffer& buffer(std::string_view address) const {
        const BufferStore& store = store_of(address);
        const auto it = store.find(strip(address));
        if (it == store.end()) throw DomainError("buffer '" + std::string(address) + "' is empty");
        return it->second;
    }

    Buffer& buffer_slot(std::string_view address) {
        if (strip(address).empty()) throw DomainError("empty buffer address");
        BufferStore& store = address.starts_with("out:") ? output_buffer : global_buffer;
        return store[std::string(strip(address))];
    }

    MacroUnit& macro(int id) {
        if (id < 0 || id >= kMacroCount) throw DomainError("macro id out of range");
        return macros[static_cast<std::size_t>(id)];
    }

private:
    static std::string_view strip(std::string_view address) {
        return address.starts_with("out:") ? address.substr(4) : address;
    }
    const BufferStore& store_of(std::string_view address) const {
        return address.starts_with("out:") ? output_buffer : global_buffer;
    }

    MachineConfig config_;
};

namespace detail {

inline LevelMatrix to_levels(const Matrix& m) {
    LevelMatrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (v != std::round(v) || v < 0 || v >= LevelCode::kCount) {
                throw DomainError("target buffer holds a non-level value");
            }
            out(i, j) = static_cast<int>(v);
        }
    }
    return out;
}

inline PlaneStack make_stack(MachineState& st, int self, const std::vector<PlaneTerm>& terms) {
    if (terms.empty()) return PlaneStack(st.macro(self).array);
    std::vector<WeightedPlane> planes;
    for (const auto& t : terms) planes.push_back({&st.macro(t.macro).array, t.weight});
    return PlaneStack(std::move(planes));
}

/// Rows are channels, each a row-major h x w map. Output rows are patches
/// (row-major over output positions), columns run over (channel, ky, kx).
inline Matrix im2col(const Matrix& src, int k, int h, int w) {
    if (src.cols() != static_cast<Eigen::Index>(h) * w) throw DomainError("im2col: row length is not h*w");
    const int oh = h - k + 1;
    const int ow = w - k + 1;
    if (oh < 1 || ow < 1) throw DomainError("im2col: kernel larger than the map");
    const auto channels = src.rows();
    Matrix out(static_cast<Eigen::Index>(oh) * ow, channels * k * k);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (Eigen::Index c = 0; c < channels; ++c)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        out(y * ow + x, (c * k + ky) * k + kx) = src(c, (y + ky) * w + (x + kx));
    return out;
}

inline void execute_mov(MachineState& st, const Instruction& ins) {
    const Buffer& in = st.buffer(ins.src);
    Buffer out;
    out.is_vector = in.is_vector;
    switch (ins.mov_op) {
        case MovOp::Copy: out.data = in.data; break;
        case MovOp::Transpose:
            out.data = in.data.transpose();
            out.is_vector = false;
            break;
        case MovOp::Scale: out.data = ins.factor * in.data; break;
        case MovOp::Axpy: {
            Matrix acc = Matrix::Zero(in.data.rows(), in.data.cols());
            if (const auto& store = ins.dst.starts_with("out:") ? st.output_buffer : st.global_buffer;
                store.contains(ins.dst.starts_with("out:") ? ins.dst.substr(4) : ins.dst)) {
                acc = st.buffer(ins.dst).data;
                if (acc.rows() != in.data.rows() || acc.cols() != in.data.cols()) {
                    throw DomainError("MOV axpy: shape mismatch");
                }
            }
            out.data = acc + ins.factor * in.data;
            break;
        }
        case MovOp::Diff: {
            if (in.data.cols() % 2 != 0) throw DomainError("MOV diff: odd column count");
            const auto half = in.data.cols() / 2;
            out.data = in.data.leftCols(half) - in.data.rightCols(half);
            break;
        }
        case MovOp::Bias: {
            const Buffer& bias = st.buffer(ins.src2);
            if (bias.data.rows() != 1 || bias.data.cols() != in.data.cols()) {
                throw DomainError("MOV bias: bias length does not match the row length");
            }
            out.data = in.data.rowwise() + bias.data.row(0);
            break;
        }
        case MovOp::Im2col:
            out.data = im2col(in.data, ins.k, ins.h, ins.w);
            out.is_vector = false;
            break;
        case MovOp::Flatten: {
            Matrix flat(1, in.data.size());
            for (Eigen::Index i = 0; i < in.data.rows(); ++i)
                flat.block(0, i * in.data.cols(), 1, in.data.cols()) = in.data.row(i);
            out.data = std::move(flat);
            out.is_vector = true;
            break;
        }
    }
    st.buffer_slot(ins.dst) = std::move(out);
}

inline void execute_exe(MachineState& st, const Instruction& ins) {
    MacroUnit& mu = st.macro(ins.macro);
    if (!mu.config) throw ConfigurationError("EXE on macro " + std::to_string(ins.macro) + " before CFG");
    const TopologyConfig& cfg = *mu.config;
    const ConverterSpec& conv = st.config().converters;
    const PlaneStack op = make_stack(st, ins.macro, mu.planes);

    Matrix out;
    BoolMatrix sat;
    double condition = 1.0;
    bool vector_out = true;

    auto single = [&](const AnalogResult& r) {
        out = r.v_out.transpose();
        sat.resize(1, r.v_out.size());
        for (Eigen::Index i = 0; i < r.v_out.size(); ++i) sat(0, i) = r.saturated[static_cast<std::size_t>(i)];
        condition = r.condition_estimate;
    };
    auto rhs_vector = [&]() -> Vector {
        if (ins.src.empty()) throw DomainError("EXE: this topology needs src");
        const Buffer& b = st.buffer(ins.src);
        if (b.data.rows() != 1) throw DomainError("EXE: right-hand side must be a vector");
        return dac_drive(b.data, conv).row(0).transpose();
    };

    switch (cfg.kind) {
        case Topology::MVM: {
            if (ins.src.empty()) throw DomainError("EXE: MVM needs src");
            const Buffer& b = st.buffer(ins.src);
            vector_out = b.is_vector;
            const Matrix raw = mvm_raw_batch(op, dac_drive(b.data, conv), cfg, mu.rng);
            out = raw.cwiseMax(-cfg.v_rail).cwiseMin(cfg.v_rail);
            sat = (raw.array().abs() > cfg.v_rail).matrix();
            break;
        }
        case Topology::INV: single(solve_inv(op, rhs_vector(), cfg, mu.rng)); break;
        case Topology::PINV: {
            if (mu.tplanes.empty()) throw ConfigurationError("PINV macro has no transpose planes");
            const PlaneStack op_t = make_stack(st, ins.macro, mu.tplanes);
            single(solve_pinv(op, op_t, rhs_vector(), cfg, mu.rng));
            break;
        }
        case Topology::EGV:
            if (!ins.src.empty()) throw DomainError("EXE: EGV takes no src");
            single(solve_egv(op, cfg, mu.rng));
            break;
    }
    mu.latch = std::move(out);
    mu.latch_saturated = std::move(sat);
    mu.latch_valid = true;
    mu.latch_vector = vector_out;
    mu.latch_condition = condition;
}

}  // namespace detail

/// Executes program[pc]. On success pc advances (HALT sets halted and
/// leaves pc on the HALT). On error the exception propagates with pc still
/// pointing at the faulting instruction.
inline void step(MachineState& st, const Program& program) {
    if (st.halted) return;
    if (st.pc >= program.size()) throw DomainError("pc ran past the end of the program");
    const Instruction& ins = program[st.pc];
    switch (ins.opcode) {
        case Opcode::HALT:
            st.halted = true;
            return;
        case Opcode::WRV: {
            MacroUnit& mu = st.macro(ins.macro);
            const LevelMatrix targets = detail::to_levels(st.buffer(ins.src).data);
            mu.array.set_region(ActiveRegion{ins.row, static_cast<int>(targets.rows()), ins.col,
                                             static_cast<int>(targets.cols())});
            if (ins.write_mode == WriteMode::Ideal) {
                mu.array.program_ideal(targets);
                mu.last_report = {};
            } else {
                const std::uint64_t seed = mu.rng();
                mu.last_report = program_array(mu.array, targets, st.config().write_verify, seed);
            }
            break;
        }
        case Opcode::CFG: {
            MacroUnit& mu = st.macro(ins.macro);
            if (ins.region) mu.array.set_region(*ins.region);
            const RegisterBits bits = encode_topology(ins.kind, ins.gain, ins.lambda, ins.rail);
            mu.register_bits = bits;
            mu.config = decode_topology(bits);
            mu.planes = ins.planes;
            mu.tplanes = ins.tplanes;
            mu.latch_valid = false;
            break;
        }
        case Opcode::EXE: detail::execute_exe(st, ins); break;
        case Opcode::RDO: {
            MacroUnit& mu = st.macro(ins.macro);
            if (!mu.latch_valid) throw ConfigurationError("RDO on macro " + std::to_string(ins.macro) + " before EXE");
            st.buffer_slot(ins.dst) = Buffer{adc_sample(mu.latch, st.config().converters), mu.latch_vector};
            break;
        }
        case Opcode::MOV: detail::execute_mov(st, ins); break;
        case Opcode::POOL: {
            const Buffer& in = st.buffer(ins.src);
            if (in.data.cols() != static_cast<Eigen::Index>(ins.h) * ins.w) {
                throw DomainError("POOL: row length is not h*w");
            }
            Matrix out(in.data.rows(), (ins.h / 2) * (ins.w / 2));
            for (Eigen::Index c = 0; c < in.data.rows(); ++c) {
                const Matrix fmap = unflatten_map(in.data.row(c), ins.h, ins.w);
                const Matrix pooled = max_pool_2x2(fmap);
                out.row(c) = flatten_map(pooled);
            }
            st.buffer_slot(ins.dst) = Buffer{std::move(out), false};
            break;
        }
        case Opcode::ACT: {
            const Buffer& in = st.buffer(ins.src);
            st.buffer_slot(ins.dst) = Buffer{relu(in.data), in.is_vector};
            break;
        }
        case Opcode::CMP: {
            MacroUnit& mu = st.macro(ins.macro);
            const LevelMatrix levels = detail::to_levels(st.buffer(ins.src).data);
            mu.array.require_shape(levels.rows(), levels.cols());
            Matrix ideal(levels.rows(), levels.cols());
            for (Eigen::Index i = 0; i < levels.rows(); ++i)
                for (Eigen::Index j = 0; j < levels.cols(); ++j)
                    ideal(i, j) = level_to_conductance(LevelCode(levels(i, j)), st.config().device);
            const double tol = ins.tol ? *ins.tol : st.config().write_verify.tolerance(st.config().device);
            const BoolMatrix mask = comparison_unit(mu.array.read_conductance_matrix(mu.rng), ideal, tol);
            st.buffer_slot(ins.dst) = Buffer{mask.cast<double>(), false};
            break;
        }
    }
    ++st.pc;
}

/// Runs from pc = 0 until HALT. The program must end with HALT.
inline void run_program(MachineState& st, const Program& program) {
    if (program.empty() || program.back().opcode != Opcode::HALT) {
        throw DecodeError("program must be terminated by HALT");
    }
    st.pc = 0;
    st.halted = false;
    while (!st.halted) step(st, program);
}

}  // namespace gramc
