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

// Converters and digital functional units shared by the machine and the
// experiment harness.

#include "gramc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace gramc {

/// Bipolar converters. Code c maps to -v_ref + c * LSB with
/// LSB = 2 * v_ref / 2^bits, so code 0 is -v_ref, code 2^(bits-1) is 0 V and
/// the top code is v_ref - LSB. The ADC rounds to the nearest code (halves
/// round up) and clamps at both ends.
struct ConverterSpec {
    int dac_bits = 8;
    int adc_bits = 8;
    double v_ref = 1.0;

    void validate() const {
        if (dac_bits < 1 || adc_bits < 1 || dac_bits > 30 || adc_bits > 30) {
            throw DomainError("converter bits must be in [1, 30]");
        }
        if (!(v_ref > 0.0)) throw DomainError("converter v_ref must be > 0");
    }
};

inline double converter_lsb(int bits, double v_ref) { return 2.0 * v_ref / static_cast<double>(1LL << bits); }

inline double dac(std::int64_t code, int bits, double v_ref) {
    if (code < 0 || code >= (1LL << bits)) throw DomainError("DAC code out of range");
    return -v_ref + static_cast<double>(code) * converter_lsb(bits, v_ref);
}

inline std::int64_t adc(double v, int bits, double v_ref) {
    if (!std::isfinite(v)) throw DomainError("ADC input is not finite");
    const double pos = std::floor((v + v_ref) / converter_lsb(bits, v_ref) + 0.5);
    const double top = static_cast<double>((1LL << bits) - 1);
    return static_cast<std::int64_t>(std::clamp(pos, 0.0, top));
}

inline double dac(std::int64_t code, const ConverterSpec& s) { return dac(code, s.dac_bits, s.v_ref); }
inline std::int64_t adc(double v, const ConverterSpec& s) { return adc(v, s.adc_bits, s.v_ref); }

/// Digital value -> DAC input code -> driven voltage.
inline double dac_drive(double v, const ConverterSpec& s) {
    return dac(adc(v, s.dac_bits, s.v_ref), s.dac_bits, s.v_ref);
}

/// Analog output -> ADC code -> digital value in volts.
inline double adc_sample(double v, const ConverterSpec& s) {
    return dac(adc(v, s.adc_bits, s.v_ref), s.adc_bits, s.v_ref);
}

inline Matrix dac_drive(const Matrix& m, const ConverterSpec& s) {
    return m.unaryExpr([&](double v) { return dac_drive(v, s); });
}

inline Matrix adc_sample(const Matrix& m, const ConverterSpec& s) {
    return m.unaryExpr([&](double v) { return adc_sample(v, s); });
}

// -----------------------------------------------------------------------------
// Digital functional units
// -----------------------------------------------------------------------------

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Comparison units: |readout - ideal| <= tol (closed band).
inline BoolMatrix comparison_unit(const Matrix& readout, const Matrix& ideal, double tol) {
    if (readout.rows() != ideal.rows() || readout.cols() != ideal.cols()) {
        throw DomainError("comparison unit: shape mismatch");
    }
    BoolMatrix mask(readout.rows(), readout.cols());
    for (Eigen::Index i = 0; i < readout.rows(); ++i)
        for (Eigen::Index j = 0; j < readout.cols(); ++j)
            mask(i, j) = std::abs(readout(i, j) - ideal(i, j)) <= tol;
    return mask;
}

/// 2x2, stride 2.
inline Matrix max_pool_2x2(const Matrix& fmap) {
    if (fmap.rows() % 2 != 0 || fmap.cols() % 2 != 0) {
        throw DomainError("max pooling needs even spatial dimensions");
    }
    Matrix out(fmap.rows() / 2, fmap.cols() / 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            out(i, j) = fmap.block<2, 2>(2 * i, 2 * j).maxCoeff();
    return out;
}

/// Row-major h x w map read from a flat row.
inline Matrix unflatten_map(const Eigen::Ref<const Eigen::RowVectorXd>& row, int h, int w) {
    if (row.size() != static_cast<Eigen::Index>(h) * w) throw DomainError("map length is not h*w");
    Matrix m(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) m(i, j) = row[static_cast<Eigen::Index>(i) * w + j];
    return m;
}

/// Row-major flattening into one row.
inline Eigen::RowVectorXd flatten_map(const Matrix& m) {
    Eigen::RowVectorXd row(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[i * m.cols() + j] = m(i, j);
    return row;
}

inline Vector relu(const Vector& v) { return v.cwiseMax(0.0); }
inline Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

struct PowerIterationResult {
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Dominant eigenvalue by power iteration from the normalized all-ones
/// vector. Stops when the Rayleigh quotient moves by at most tol * |lambda|
/// or the eigen-residual ||A x - lambda x|| drops to tol * |lambda|.
inline PowerIterationResult power_iteration(const Matrix& a, int iters = 1000, double tol = 1e-10) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DomainError("power iteration needs a square matrix");
    PowerIterationResult r;
    Vector x = Vector::Ones(a.rows()).normalized();
    double prev = 0.0;
    for (int k = 1; k <= iters; ++k) {
        const Vector y = a * x;
        const double lambda = x.dot(y);
        r.lambda = lambda;
        r.iterations = k;
        const double resid = (y - lambda * x).norm();
        if (resid <= tol * std::abs(lambda) || (k > 1 && std::abs(lambda - prev) <= tol * std::abs(lambda))) {
            r.converged = true;
            break;
        }
        const double ny = y.norm();
        if (ny == 0.0) break;
        x = y / ny;
        prev = lambda;
    }
    return r;
}

}  // namespace gramc
