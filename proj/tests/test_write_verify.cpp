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

#include "gramc/crossbar_array.hpp"
#include "gramc/write_verify.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace gramc;
using Catch::Matchers::WithinAbs;

namespace {

DeviceParams quiet() {
    DeviceParams p;
    p.sigma_read = 0.0;
    p.sigma_write = 0.0;
    return p;
}

}  // namespace

TEST_CASE("default tolerance keeps adjacent bands apart", "[write_verify]") {
    const DeviceParams p;
    const WriteVerifyConfig cfg;
    CHECK_THAT(cfg.tolerance(p), WithinAbs(0.5 * p.level_spacing() * 0.6, 1e-18));
    CHECK(2 * cfg.tolerance(p) < p.level_spacing());
    WriteVerifyConfig abs = cfg;
    abs.tol = 1e-6;
    CHECK(abs.tolerance(p) == 1e-6);
}

TEST_CASE("config validation", "[write_verify]") {
    const DeviceParams p;
    WriteVerifyConfig c;
    c.max_pulses = 0;
    CHECK_THROWS_AS(c.validate(p), DomainError);
    c = {};
    c.vg_step = 0.0;
    CHECK_THROWS_AS(c.validate(p), DomainError);
    c = {};
    c.vsl_start = 2.0;
    CHECK_THROWS_AS(c.validate(p), DomainError);
    c = {};
    c.tol = -1.0;
    CHECK_THROWS_AS(c.validate(p), DomainError);
}

TEST_CASE("already in band costs nothing", "[write_verify]") {
    const DeviceParams p = quiet();
    Rng rng(1);
    const auto [s, r] = program_cell(make_state(7.0 / 15.0, p), LevelCode(7), {}, p, rng);
    CHECK(r.pulses_used == 0);
    CHECK(r.success);
    CHECK(s == make_state(7.0 / 15.0, p));
}

TEST_CASE("level 0 to level 15 without noise", "[write_verify]") {
    const DeviceParams p = quiet();
    const WriteVerifyConfig cfg;
    Rng rng(2);
    const auto [s, r] = program_cell(make_state(0.0, p), LevelCode(15), cfg, p, rng);
    CHECK(r.success);
    CHECK(r.pulses_used <= cfg.max_pulses);
    CHECK(std::abs(s.g - 100e-6) <= cfg.tolerance(p));
}

TEST_CASE("level 9 from level 0 with a fixed seed", "[write_verify]") {
    const DeviceParams p;
    const WriteVerifyConfig cfg;
    Rng rng = make_stream(2026, 0);
    const auto [s, r] = program_cell(make_state(0.0, p), LevelCode(9), cfg, p, rng);
    CHECK(r.success);
    CHECK_THAT(r.target_g, WithinAbs(60.4e-6, 1e-15));
    CHECK(std::abs(r.final_g - 60.4e-6) <= cfg.tolerance(p));
}

TEST_CASE("pulse direction follows the last read", "[write_verify]") {
    const DeviceParams p = quiet();
    const WriteVerifyConfig cfg;
    Rng rng(3);
    for (int start : {0, 15, 4}) {
        for (int target : {0, 3, 8, 15}) {
            const double tgt = level_to_conductance(LevelCode(target), p);
            const double tol = cfg.tolerance(p);
            int sets = 0, resets = 0;
            double last_v = -1.0;
            PulseKind last_kind = PulseKind::Set;
            bool first = true;
            program_cell(make_state(start / 15.0, p), LevelCode(target), cfg, p, rng,
                         [&](PulseKind k, double v, double g) {
                             if (k == PulseKind::Set) {
                                 CHECK(g < tgt - tol);
                                 ++sets;
                             } else {
                                 CHECK(g > tgt + tol);
                                 ++resets;
                             }
                             // ramps restart whenever the direction flips
                             if (first || k != last_kind) {
                                 CHECK(v == (k == PulseKind::Set ? cfg.vg_start : cfg.vsl_start));
                             } else {
                                 CHECK(v >= last_v);
                             }
                             first = false;
                             last_kind = k;
                             last_v = v;
                         });
            if (target * 1.0 / 15 > start / 15.0 + 1e-9 && target != start) CHECK(sets > 0);
        }
    }
}

TEST_CASE("exhausted budget is reported, not retried", "[write_verify]") {
    DeviceParams p = quiet();
    WriteVerifyConfig cfg;
    cfg.max_pulses = 3;
    Rng rng(4);
    const auto [s, r] = program_cell(make_state(0.0, p), LevelCode(15), cfg, p, rng);
    CHECK_FALSE(r.success);
    CHECK(r.pulses_used == 3);
    // a ramp capped below threshold can never move the cell
    cfg.max_pulses = 50;
    cfg.vg_start = 0.2;
    cfg.vg_max = 0.4;
    const auto [s2, r2] = program_cell(make_state(0.0, p), LevelCode(15), cfg, p, rng);
    CHECK_FALSE(r2.success);
    CHECK(r2.pulses_used == 50);
    CHECK(s2.x == 0.0);
}

TEST_CASE("budget respected over 10^4 random pairs", "[write_verify][property]") {
    DeviceParams p;
    WriteVerifyConfig cfg;
    cfg.max_pulses = 200;
    Rng rng(5);
    std::uniform_real_distribution<double> unit(0, 1);
    std::uniform_int_distribution<int> level(0, 15);
    int failures = 0;
    for (int k = 0; k < 10000; ++k) {
        const auto [s, r] = program_cell(make_state(unit(rng), p), LevelCode(level(rng)), cfg, p, rng);
        REQUIRE(r.pulses_used <= cfg.max_pulses);
        REQUIRE(r.pulses_used >= 0);
        if (r.success) REQUIRE(std::abs(r.final_g - r.target_g) <= cfg.tolerance(p));
        failures += r.success ? 0 : 1;
    }
    CHECK(failures < 500);
}

TEST_CASE("noise-free success is sound", "[write_verify][property]") {
    const DeviceParams p = quiet();
    const WriteVerifyConfig cfg;
    Rng rng(6);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int k = 0; k < 2000; ++k) {
        const int target = k % 16;
        const auto [s, r] = program_cell(make_state(unit(rng), p), LevelCode(target), cfg, p, rng);
        if (r.success) REQUIRE(std::abs(s.g - level_to_conductance(LevelCode(target), p)) <= cfg.tolerance(p));
    }
}

TEST_CASE("array programming: zeros on a fresh array", "[write_verify]") {
    CrossbarArray a;
    a.set_region({0, 16, 0, 16});
    const ArrayProgramReport r = program_array(a, LevelMatrix::Zero(16, 16), {}, 1);
    CHECK(r.success_rate() == 1.0);
    CHECK(r.total_pulses() == 0);
}

TEST_CASE("array programming: random 4-bit targets", "[write_verify]") {
    CrossbarArray a;
    a.set_region({0, 16, 0, 16});
    Rng rng(7);
    std::uniform_int_distribution<int> level(0, 15);
    LevelMatrix t(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) t(i, j) = level(rng);
    const ArrayProgramReport r = program_array(a, t, {}, 8);
    CHECK(r.success_rate() >= 0.95);
    CHECK_THROWS_AS(program_array(a, LevelMatrix::Zero(4, 4), {}, 8), DomainError);
}

TEST_CASE("array programming: checkerboard read-back", "[write_verify]") {
    const DeviceParams p = quiet();
    CrossbarArray a(p);
    a.set_region({0, 8, 0, 8});
    LevelMatrix t(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) t(i, j) = (i + j) % 2 ? 15 : 0;
    const WriteVerifyConfig cfg;
    const ArrayProgramReport r = program_array(a, t, cfg, 9);
    CHECK(r.success_rate() == 1.0);
    Rng rng(1);
    const Matrix g = a.read_conductance_matrix(rng);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            CHECK(std::abs(g(i, j) - level_to_conductance(LevelCode(t(i, j)), p)) <= cfg.tolerance(p));
}

TEST_CASE("sixteen levels separate after programming", "[write_verify]") {
    const DeviceParams p = quiet();
    CrossbarArray a(p);
    a.set_region({0, 1, 0, 16});
    LevelMatrix t(1, 16);
    for (int k = 0; k < 16; ++k) t(0, k) = k;
    program_array(a, t, {}, 10);
    const Matrix g = a.nominal_conductance_matrix();
    for (int k = 1; k < 16; ++k) CHECK(g(0, k) > g(0, k - 1));
}

TEST_CASE("array outcome does not depend on the window origin's neighbours", "[write_verify]") {
    // each cell draws from its own stream, so programming a sub-block gives
    // the same cells as programming them inside a bigger block
    CrossbarArray a, b;
    a.set_region({0, 4, 0, 4});
    b.set_region({0, 2, 0, 2});
    LevelMatrix t = LevelMatrix::Constant(4, 4, 11);
    program_array(a, t, {}, 77);
    program_array(b, LevelMatrix::Constant(2, 2, 11), {}, 77);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(a.cell(i, j) == b.cell(i, j));
}
