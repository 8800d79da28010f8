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

#include "gramc/amc_core.hpp"
#include "gramc/experiments.hpp"
#include "gramc/mapping.hpp"
#include "support/oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

using namespace gramc;

namespace {

Matrix uniform_matrix(int rows, int cols, double lo, double hi, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

QuantizationScheme scheme(int slices, SignedMode mode, double a_max = 1.0) {
    QuantizationScheme s;
    s.n_slices = slices;
    s.signed_mode = mode;
    s.a_max = a_max;
    return s;
}

DeviceParams quiet() {
    DeviceParams p;
    p.sigma_read = 0.0;
    p.sigma_write = 0.0;
    return p;
}

// plane k of a mapped matrix, written ideally onto its own array
std::vector<CrossbarArray> program_planes(const MappedMatrix& mm, const DeviceParams& p) {
    std::vector<CrossbarArray> arrays;
    for (const auto& plane : mm.level_planes) {
        CrossbarArray a(p);
        a.set_region({0, static_cast<int>(mm.rows), 0, static_cast<int>(mm.cols)});
        a.program_ideal(plane);
        arrays.push_back(std::move(a));
    }
    return arrays;
}

// analog column sums of one plane, converted back to integer level units;
// inputs are multiples of `x_unit` volts
std::vector<long long> plane_codes(const CrossbarArray& a, const Vector& x, double x_unit, double rf,
                                   const DeviceParams& p) {
    Rng rng(0);
    const AnalogResult r = solve_mvm(PlaneStack(a), x, make_topology(Topology::MVM, rf, 0.0, 1e9), rng);
    const Vector clean = remove_conductance_floor(r.v_out, x, rf, p.g_min);
    std::vector<long long> out;
    for (Eigen::Index j = 0; j < clean.size(); ++j) {
        out.push_back(std::llround(-clean[j] / (rf * p.level_spacing() * x_unit)));
    }
    return out;
}

}  // namespace

TEST_CASE("zero matrix maps to level zero", "[mapping]") {
    for (int slices : {1, 2}) {
        const MappedMatrix mm = quantize_matrix(Matrix::Zero(4, 5), scheme(slices, SignedMode::Differential));
        CHECK(mm.level_planes.size() == static_cast<std::size_t>(2 * slices));
        for (const auto& p : mm.level_planes) CHECK(p.isZero());
        CHECK(reconstruct_effective_matrix(mm).isZero(0.0));
    }
}

TEST_CASE("full-scale identity in nonnegative mode", "[mapping]") {
    const MappedMatrix mm = quantize_matrix(2.5 * Matrix::Identity(6, 6), scheme(1, SignedMode::Nonnegative, 2.5));
    REQUIRE(mm.level_planes.size() == 1);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(mm.level_planes[0](i, j) == (i == j ? 15 : 0));
}

TEST_CASE("one-slice rounding bound", "[mapping]") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix a = uniform_matrix(17, 13, -1.0, 1.0, seed);
        const MappedMatrix mm = quantize_matrix(a, scheme(1, SignedMode::Differential));
        const double err = (reconstruct_effective_matrix(mm) - a).cwiseAbs().maxCoeff();
        REQUIRE(err <= 1.0 / (2 * 15) + 1e-12);
    }
}

TEST_CASE("clamping and the quantum bound hold out of range", "[mapping][property]") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const double a_max = 0.3 + 0.1 * static_cast<double>(seed);
        const Matrix a = uniform_matrix(9, 9, -2.0, 2.0, seed + 50);
        for (int slices : {1, 2}) {
            const QuantizationScheme s = scheme(slices, SignedMode::Differential, a_max);
            const MappedMatrix mm = quantize_matrix(a, s);
            for (const auto& p : mm.level_planes) REQUIRE((p.minCoeff() >= 0 && p.maxCoeff() <= 15));
            const Matrix clamped = a.cwiseMax(-a_max).cwiseMin(a_max);
            REQUIRE((reconstruct_effective_matrix(mm) - clamped).cwiseAbs().maxCoeff() <= s.quantum() / 2 + 1e-12);
        }
    }
}

TEST_CASE("8-bit grid values round-trip exactly", "[mapping]") {
    Matrix a(16, 16);
    for (int k = 0; k < 256; ++k) a(k / 16, k % 16) = k / 255.0;
    const MappedMatrix mm = quantize_matrix(a, scheme(2, SignedMode::Nonnegative));
    REQUIRE(mm.level_planes.size() == 2);
    for (int k = 0; k < 256; ++k) {
        CHECK(mm.level_planes[0](k / 16, k % 16) == k / 16);
        CHECK(mm.level_planes[1](k / 16, k % 16) == k % 16);
    }
    const Matrix back = reconstruct_effective_matrix(mm);
    for (int k = 0; k < 256; ++k) CHECK(std::llround(back(k / 16, k % 16) * 255.0) == k);
    CHECK((back - a).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("round half to even", "[mapping]") {
    using detail::round_half_even;
    CHECK(round_half_even(0.5) == 0.0);
    CHECK(round_half_even(1.5) == 2.0);
    CHECK(round_half_even(2.5) == 2.0);
    CHECK(round_half_even(2.4) == 2.0);
    CHECK(round_half_even(2.6) == 3.0);
    // a value sitting exactly between two codes rounds to the even code
    const MappedMatrix mm = quantize_matrix(Matrix::Constant(1, 1, 7.5), scheme(1, SignedMode::Nonnegative, 15.0));
    CHECK(mm.level_planes[0](0, 0) == 8);
}

TEST_CASE("quantize rejects bad input", "[mapping]") {
    Matrix a = Matrix::Ones(2, 2);
    a(1, 0) = std::nan("");
    CHECK_THROWS_AS(quantize_matrix(a, scheme(1, SignedMode::Differential)), DomainError);
    CHECK_THROWS_AS(quantize_matrix(Matrix::Ones(2, 2), scheme(3, SignedMode::Differential)), DomainError);
    CHECK_THROWS_AS(quantize_matrix(Matrix::Ones(2, 2), scheme(1, SignedMode::Differential, 0.0)), DomainError);
}

TEST_CASE("combine_slices", "[mapping]") {
    const QuantizationScheme s = scheme(2, SignedMode::Nonnegative, 255.0);  // quantum 1
    CHECK(combine_slices(Vector::Zero(3), Vector::Zero(3), s).isZero(0.0));
    Vector msb(1), lsb(1);
    msb << 7;
    lsb << 15;
    CHECK(combine_slices(msb, lsb, s)[0] == 127.0);
    CHECK_THROWS_AS(combine_slices(Vector::Zero(2), Vector::Zero(3), s), DomainError);
    CHECK_THROWS_AS(combine_slices(msb, lsb, scheme(1, SignedMode::Nonnegative)), DomainError);
}

TEST_CASE("signed_output_combine", "[mapping]") {
    const Vector v = uniform_matrix(5, 1, -1, 1, 3).col(0);
    CHECK(signed_output_combine(v, v).isZero(0.0));
    CHECK(signed_output_combine(v, Vector::Zero(5)) == v);
    CHECK_THROWS_AS(signed_output_combine(v, Vector::Zero(4)), DomainError);
}

TEST_CASE("floor removal recovers the level product", "[mapping]") {
    const DeviceParams p = quiet();
    CrossbarArray a(p);
    a.set_region({0, 1, 0, 1});
    a.program_ideal(LevelMatrix::Constant(1, 1, 0));
    Vector x(1);
    x << 0.3;
    Rng rng(0);
    const double rf = 1e4;
    const AnalogResult r = solve_mvm(PlaneStack(a), x, make_topology(Topology::MVM, rf), rng);
    CHECK(std::abs(remove_conductance_floor(r.v_out, x, rf, p.g_min)[0]) <= 1e-15);
}

TEST_CASE("sliced analog MVM equals the 8-bit digital product in code space", "[mapping]") {
    const DeviceParams p = quiet();
    const double rf = 1e3;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        std::uniform_int_distribution<int> code(0, 255);
        std::uniform_int_distribution<int> xin(-8, 8);
        Matrix a(24, 20);
        for (auto& v : a.reshaped()) v = code(rng) / 255.0;
        Vector x(24);
        for (auto& v : x) v = xin(rng) * 0.01;
        const MappedMatrix mm = quantize_matrix(a, scheme(2, SignedMode::Nonnegative));
        const auto arrays = program_planes(mm, p);
        const auto msb = plane_codes(arrays[0], x, 0.01, rf, p);
        const auto lsb = plane_codes(arrays[1], x, 0.01, rf, p);
        for (int j = 0; j < 20; ++j) {
            long long digital = 0;
            for (int i = 0; i < 24; ++i) {
                digital += static_cast<long long>(std::llround(a(i, j) * 255.0)) * std::llround(x[i] * 100.0);
            }
            const long long analog = (16 * msb[static_cast<std::size_t>(j)] + lsb[static_cast<std::size_t>(j)]);
            REQUIRE(analog == digital);
        }
    }
}

TEST_CASE("differential MVM equals digital MVM on the reconstructed matrix", "[mapping]") {
    const DeviceParams p = quiet();
    const double rf = 1e3;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Matrix a = uniform_matrix(16, 12, -1, 1, seed + 10);
        const QuantizationScheme s = scheme(1, SignedMode::Differential);
        const MappedMatrix mm = quantize_matrix(a, s, p);
        const auto arrays = program_planes(mm, p);
        Rng rng(seed);
        std::uniform_int_distribution<int> xin(-10, 10);
        Vector x(16);
        for (auto& v : x) v = xin(rng) * 0.01;
        Rng r0(0);
        const Vector vp = solve_mvm(PlaneStack(arrays[0]), x, make_topology(Topology::MVM, rf, 0.0, 1e9), r0).v_out;
        const Vector vn = solve_mvm(PlaneStack(arrays[1]), x, make_topology(Topology::MVM, rf, 0.0, 1e9), r0).v_out;
        const Vector diff = signed_output_combine(vp, vn);  // floors cancel between the planes
        const Vector y = -diff * mm.scheme.scale / rf;
        const oracle::Vec ref = oracle::matvec(oracle::transpose(oracle::from_eigen(reconstruct_effective_matrix(mm))),
                                               oracle::from_eigen(x));
        for (int j = 0; j < 12; ++j) {
            // compare in code space: both sides are integer multiples of quantum * 0.01
            const double unit = s.quantum() * 0.01;
            REQUIRE(std::llround(y[j] / unit) == std::llround(ref[static_cast<std::size_t>(j)] / unit));
            REQUIRE(std::abs(y[j] - ref[static_cast<std::size_t>(j)]) <= 1e-12);
        }
    }
}

TEST_CASE("8-bit mapping is no less accurate than 4-bit", "[mapping][property]") {
    SimConfig cfg;
    cfg.seed = 77;
    cfg.trials = 20;
    cfg.bits = 4;
    const ValidationReport r4 = run_validation(Topology::MVM, MatrixKind::Wishart, 32, 32, cfg);
    cfg.bits = 8;
    const ValidationReport r8 = run_validation(Topology::MVM, MatrixKind::Wishart, 32, 32, cfg);
    INFO("4-bit median " << r4.median_rel_error() << ", 8-bit median " << r8.median_rel_error());
    CHECK(r8.median_rel_error() <= r4.median_rel_error());
}
