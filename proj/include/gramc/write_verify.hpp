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

// Write-verify controller: verify-read, then SET (stepped gate voltage) or
// RESET (stepped source-line voltage) until the read lands in the tolerance
// band or the pulse budget runs out.

#include "gramc/common.hpp"
#include "gramc/crossbar_array.hpp"
#include "gramc/rram_device.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace gramc {

struct WriteVerifyConfig {
    /// Absolute band half-width in siemens. Unset means
    /// 0.5 * level_spacing * tol_fraction.
    std::optional<double> tol;
    double tol_fraction = 0.6;
    int max_pulses = 200;
    double vg_start = 0.6;
    double vg_step = 0.05;
    double vg_max = 1.5;
    double vsl_start = 0.6;
    double vsl_step = 0.05;
    double vsl_max = 1.5;

    [[nodiscard]] double tolerance(const DeviceParams& p) const {
        return tol ? *tol : 0.5 * p.level_spacing() * tol_fraction;
    }

    void validate(const DeviceParams& p) const {
        if (!(tolerance(p) > 0.0)) throw DomainError("write-verify: tol must be > 0");
        if (max_pulses < 1) throw DomainError("write-verify: max_pulses must be >= 1");
        if (!(vg_step > 0.0) || !(vsl_step > 0.0)) throw DomainError("write-verify: steps must be > 0");
        if (vg_start > vg_max || vsl_start > vsl_max) {
            throw DomainError("write-verify: schedule start exceeds max");
        }
    }
};

struct ProgramReport {
    int pulses_used = 0;
    double final_g = 0.0;   // last verify read
    double target_g = 0.0;
    bool success = false;
};

enum class PulseKind { Set, Reset };

/// Optional observer of every pulse issued; receives the verify read that
/// triggered the pulse.
using PulseObserver = std::function<void(PulseKind, double voltage, double read_g)>;

inline std::pair<DeviceState, ProgramReport> program_cell(DeviceState state, LevelCode target,
                                                          const WriteVerifyConfig& cfg,
                                                          const DeviceParams& params, Rng& rng,
                                                          const PulseObserver& observer = {}) {
    const double tol = cfg.tolerance(params);
    ProgramReport report;
    report.target_g = level_to_conductance(target, params);

    double vg = cfg.vg_start;
    double vsl = cfg.vsl_start;
    std::optional<PulseKind> last;

    for (;;) {
        const double g = read_conductance(state, params, rng);
        report.final_g = g;
        if (std::abs(g - report.target_g) <= tol) {
            report.success = true;
            break;
        }
        if (report.pulses_used >= cfg.max_pulses) break;

        if (g < report.target_g - tol) {
            if (last != PulseKind::Set) vg = cfg.vg_start;
            if (observer) observer(PulseKind::Set, vg, g);
            state = apply_set_pulse(state, vg, params, rng);
            vg = std::min(vg + cfg.vg_step, cfg.vg_max);
            last = PulseKind::Set;
        } else {
            if (last != PulseKind::Reset) vsl = cfg.vsl_start;
            if (observer) observer(PulseKind::Reset, vsl, g);
            state = apply_reset_pulse(state, vsl, params, rng);
            vsl = std::min(vsl + cfg.vsl_step, cfg.vsl_max);
            last = PulseKind::Reset;
        }
        ++report.pulses_used;
    }
    return {state, report};
}

/// Row-major report grid matching the active region.
struct ArrayProgramReport {
    int rows = 0;
    int cols = 0;
    std::vector<ProgramReport> cells;

    [[nodiscard]] const ProgramReport& at(int i, int j) const {
        return cells[static_cast<std::size_t>(i) * cols + j];
    }
    [[nodiscard]] double success_rate() const {
        if (cells.empty()) return 1.0;
        std::size_t ok = 0;
        for (const auto& r : cells) ok += r.success ? 1 : 0;
        return static_cast<double>(ok) / static_cast<double>(cells.size());
    }
    [[nodiscard]] long total_pulses() const {
        long n = 0;
        for (const auto& r : cells) n += r.pulses_used;
        return n;
    }
};

/// Programs every active cell in row-major order, each from its own stream
/// make_stream(seed, absolute cell index), so the outcome does not depend
/// on the visiting order.
inline ArrayProgramReport program_array(CrossbarArray& array, const LevelMatrix& targets,
                                        const WriteVerifyConfig& cfg, std::uint64_t seed) {
    array.require_shape(targets.rows(), targets.cols());
    cfg.validate(array.params());
    const ActiveRegion& r = array.region();
    ArrayProgramReport out;
    out.rows = r.row_count;
    out.cols = r.col_count;
    out.cells.resize(static_cast<std::size_t>(r.row_count) * r.col_count);
    for (int i = 0; i < r.row_count; ++i) {
        for (int j = 0; j < r.col_count; ++j) {
            const LevelCode target(targets(i, j));
            const auto cell_index =
                static_cast<std::uint64_t>(r.row_start + i) * CrossbarArray::kCols + (r.col_start + j);
            Rng rng = make_stream(seed, cell_index);
            auto [state, report] = program_cell(array.active_cell(i, j), target, cfg, array.params(), rng);
            array.active_cell(i, j) = state;
            out.cells[static_cast<std::size_t>(i) * r.col_count + j] = report;
        }
    }
    return out;
}

}  // namespace gramc
