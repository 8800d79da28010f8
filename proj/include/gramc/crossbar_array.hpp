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

// 128x128 1T1R crosspoint array.
//
// Orientation: rows are driven bit lines (voltage inputs), columns collect
// current, so an evaluation returns I_j = sum_i G_ij * V_i. Only the active
// region, a contiguous rectangle picked by the BL/WL/SL drivers, is
// electrically present.

#include "gramc/common.hpp"
#include "gramc/rram_device.hpp"

#include <span>
#include <string>
#include <vector>

namespace gramc {

struct ActiveRegion {
    int row_start = 0;
    int row_count = 1;
    int col_start = 0;
    int col_count = 1;

    friend bool operator==(const ActiveRegion&, const ActiveRegion&) = default;
};

/// I_j = sum_i G_ij * v_i, accumulated in ascending row order so results
/// do not depend on vectorization.
inline Vector column_currents(const Matrix& g, const Vector& v) {
    Vector out(g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < g.rows(); ++i) acc += g(i, j) * v[i];
        out[j] = acc;
    }
    return out;
}

class CrossbarArray {
public:
    static constexpr int kRows = 128;
    static constexpr int kCols = 128;

    explicit CrossbarArray(DeviceParams params = {})
        : params_(params),
          cells_(static_cast<std::size_t>(kRows) * kCols, make_state(0.0, params)),
          active_{0, kRows, 0, kCols} {
        params_.validate();
    }

    [[nodiscard]] const DeviceParams& params() const { return params_; }
    [[nodiscard]] const ActiveRegion& region() const { return active_; }
    [[nodiscard]] int active_rows() const { return active_.row_count; }
    [[nodiscard]] int active_cols() const { return active_.col_count; }

    static void check_region(const ActiveRegion& r) {
        if (r.row_count < 1 || r.col_count < 1 || r.row_start < 0 || r.col_start < 0 ||
            r.row_start + r.row_count > kRows || r.col_start + r.col_count > kCols) {
            throw DomainError("active region does not fit the 128x128 array");
        }
    }

    void set_region(const ActiveRegion& r) {
        check_region(r);
        active_ = r;
    }

    /// Absolute addressing, independent of the active region.
    [[nodiscard]] const DeviceState& cell(int row, int col) const { return cells_[index(row, col)]; }
    DeviceState& cell(int row, int col) { return cells_[index(row, col)]; }

    /// Addressing relative to the active region's origin.
    [[nodiscard]] const DeviceState& active_cell(int i, int j) const {
        return cell(active_.row_start + i, active_.col_start + j);
    }
    DeviceState& active_cell(int i, int j) { return cell(active_.row_start + i, active_.col_start + j); }

    /// Noise-free conductances of the active region.
    [[nodiscard]] Matrix nominal_conductance_matrix() const {
        Matrix g(active_.row_count, active_.col_count);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) g(i, j) = active_cell(i, j).g;
        return g;
    }

    /// One verify read of every active cell, with independent noise per cell.
    [[nodiscard]] Matrix read_conductance_matrix(Rng& rng) const {
        Matrix g(active_.row_count, active_.col_count);
        if (params_.sigma_read == 0.0) return nominal_conductance_matrix();
        std::normal_distribution<double> eps(0.0, params_.sigma_read);
        for (int i = 0; i < g.rows(); ++i) {
            for (int j = 0; j < g.cols(); ++j) {
                const double v = active_cell(i, j).g * (1.0 + eps(rng));
                g(i, j) = std::clamp(v, params_.g_min, params_.g_max);
            }
        }
        return g;
    }

    /// Column currents for row voltages v_in: I = G_read^T * v_in.
    [[nodiscard]] Vector mvm_currents(const Vector& v_in, Rng& rng) const {
        if (v_in.size() != active_.row_count) {
            throw DomainError("mvm input length " + std::to_string(v_in.size()) +
                              " does not match active rows " + std::to_string(active_.row_count));
        }
        return column_currents(read_conductance_matrix(rng), v_in);
    }

    /// Direct state assignment of the active region to exact level
    /// conductances, bypassing write-verify.
    void program_ideal(const LevelMatrix& levels) {
        require_shape(levels.rows(), levels.cols());
        for (int i = 0; i < levels.rows(); ++i) {
            for (int j = 0; j < levels.cols(); ++j) {
                const int lv = LevelCode(levels(i, j)).value();
                active_cell(i, j) = make_state(static_cast<double>(lv) / (LevelCode::kCount - 1), params_);
            }
        }
    }

    /// Direct assignment of arbitrary (unquantized) conductances in [g_min, g_max].
    void set_conductances(const Matrix& g) {
        require_shape(g.rows(), g.cols());
        for (int i = 0; i < g.rows(); ++i) {
            for (int j = 0; j < g.cols(); ++j) {
                const double v = g(i, j);
                if (!(v >= params_.g_min && v <= params_.g_max)) {
                    throw DomainError("conductance outside [g_min, g_max]");
                }
                DeviceState s{(v - params_.g_min) / params_.range(), v};
                active_cell(i, j) = s;
            }
        }
    }

    void require_shape(Eigen::Index rows, Eigen::Index cols) const {
        if (rows != active_.row_count || cols != active_.col_count) {
            throw DomainError("matrix shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " does not match active region " + std::to_string(active_.row_count) + "x" +
                              std::to_string(active_.col_count));
        }
    }

private:
    static std::size_t index(int row, int col) {
        if (row < 0 || row >= kRows || col < 0 || col >= kCols) {
            throw DomainError("cell address outside the array");
        }
        return static_cast<std::size_t>(row) * kCols + col;
    }

    DeviceParams params_;
    std::vector<DeviceState> cells_;
    ActiveRegion active_;
};

inline CrossbarArray select_region(CrossbarArray array, const ActiveRegion& region) {
    array.set_region(region);
    return array;
}

inline Matrix read_conductance_matrix(const CrossbarArray& array, Rng& rng) {
    return array.read_conductance_matrix(rng);
}

inline Vector mvm_currents(const CrossbarArray& array, const Vector& v_in, Rng& rng) {
    return array.mvm_currents(v_in, rng);
}

}  // namespace gramc
