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

// Acceptance run: one PASS/FAIL line per criterion with the measured values.
// Exit status is nonzero when any criterion fails.

#include "gramc/experiments.hpp"
#include "support/oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace gramc;
namespace fs = std::filesystem;

namespace {

const std::string kSource = GRAMC_SOURCE_DIR;
const std::string kCli = GRAMC_CLI_PATH;

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

DeviceParams quiet() {
    DeviceParams p;
    p.sigma_read = 0.0;
    p.sigma_write = 0.0;
    return p;
}

/// Unquantized signed matrix on a differential pair of arrays.
struct SignedPair {
    CrossbarArray pos;
    CrossbarArray neg;
    double s = 0.0;

    SignedPair(const Matrix& a, const DeviceParams& p) : pos(p), neg(p) {
        const double amax = a.cwiseAbs().maxCoeff();
        s = 0.9 * p.range() / amax;
        const ActiveRegion r{0, static_cast<int>(a.rows()), 0, static_cast<int>(a.cols())};
        pos.set_region(r);
        neg.set_region(r);
        pos.set_conductances((p.g_min + s * a.cwiseMax(0.0).array()).matrix());
        neg.set_conductances((p.g_min + s * (-a).cwiseMax(0.0).array()).matrix());
    }
    [[nodiscard]] PlaneStack stack() const { return PlaneStack({{&pos, 1.0}, {&neg, -1.0}}); }
};

Matrix uniform_matrix(int rows, int cols, Rng& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

// ---------------------------------------------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig cfg;
    cfg.seed = 1;
    const ProgramDemoResult r = program_demo(cfg, 256);
    const double secs = seconds_since(t0);
    // mean nominal read-back per level
    std::vector<double> sum(16, 0.0);
    std::vector<int> n(16, 0);
    for (int i = 0; i < r.targets.rows(); ++i)
        for (int j = 0; j < r.targets.cols(); ++j) {
            sum[static_cast<std::size_t>(r.targets(i, j))] += r.nominal(i, j);
            ++n[static_cast<std::size_t>(r.targets(i, j))];
        }
    bool increasing = true;
    for (int l = 1; l < 16; ++l) {
        increasing = increasing && sum[static_cast<std::size_t>(l)] / n[static_cast<std::size_t>(l)] >
                                       sum[static_cast<std::size_t>(l - 1)] / n[static_cast<std::size_t>(l - 1)];
    }
    const double rate = r.report.success_rate();
    int max_pulses = 0;
    for (const auto& c : r.report.cells) max_pulses = std::max(max_pulses, c.pulses_used);
    report("1", rate >= 0.95 && increasing && secs < 10.0 && max_pulses <= cfg.write_verify.max_pulses,
           "16 levels x 256 cells, success " + fmt(100 * rate) + "% (need >= 95%), level means strictly increasing: " +
               (increasing ? "yes" : "no") + ", max pulses " + std::to_string(max_pulses) + ", " + fmt(secs, 3) +
               " s (need < 10 s)");
}

void criterion_2() {
    const DeviceParams p;  // default noise
    Rng rng(20260001);
    std::uniform_real_distribution<double> ux(0.0, 1.0);
    std::uniform_int_distribution<int> lv(0, 15);
    std::uniform_int_distribution<int> budget(1, 200);
    int violations = 0;
    int failed = 0;
    int inconsistent = 0;
    for (int k = 0; k < 10000; ++k) {
        WriteVerifyConfig cfg;
        // half the pairs use the default budget, half a random tighter one
        if (k % 2) cfg.max_pulses = budget(rng);
        const DeviceState init = make_state(ux(rng), p);
        const LevelCode target(lv(rng));
        auto [state, rep] = program_cell(init, target, cfg, p, rng);
        if (rep.pulses_used > cfg.max_pulses) ++violations;
        if (!rep.success) ++failed;
        if (rep.success != (std::abs(rep.final_g - rep.target_g) <= cfg.tolerance(p))) ++inconsistent;
    }
    report("2", violations == 0 && inconsistent == 0,
           "10^4 random (initial, target) pairs: budget violations " + std::to_string(violations) +
               ", reported failures " + std::to_string(failed) + ", success flag inconsistencies " +
               std::to_string(inconsistent));
}

std::string band(double e) { return fmt(100 * e, 5) + "%"; }

void criterion_3_4() {
    SimConfig cfg;
    cfg.seed = 2026;
    cfg.trials = 10;
    const auto t0 = std::chrono::steady_clock::now();
    const ValidationReport mvm = run_validation(Topology::MVM, MatrixKind::Wishart, 128, 128, cfg);
    const ValidationReport inv = run_validation(Topology::INV, MatrixKind::Wishart, 128, 128, cfg);
    const double secs = seconds_since(t0);
    auto in_band = [](double e) { return e >= 0.02 && e <= 0.20; };
    auto ok_trials = [](const ValidationReport& r) {
        int n = 0;
        for (const auto& t : r.trials) n += t.status == "ok";
        return n;
    };
    const double em = mvm.median_rel_error();
    const double ei = inv.median_rel_error();
    report("3 (MVM)", in_band(em) && secs < 60.0,
           "wishart(128), 10 trials, median relative error " + band(em) + " (band 2%..20%), ok trials " +
               std::to_string(ok_trials(mvm)));
    report("3 (INV)", in_band(ei) && ok_trials(inv) == 10 && secs < 60.0,
           "wishart(128), 10 trials, median relative error " + band(ei) + " (band 2%..20%), ok trials " +
               std::to_string(ok_trials(inv)) + ", MVM+INV time " + fmt(secs, 3) + " s (need < 60 s)");

    const ValidationReport pinv = run_validation(Topology::PINV, MatrixKind::Regression, 128, 6, cfg);
    const double ep = pinv.median_rel_error();
    report("4", in_band(ep) && ok_trials(pinv) == 10,
           "regression(128,6), 10 trials, median relative error vs least squares " + band(ep) +
               " (band 2%..20%), ok trials " + std::to_string(ok_trials(pinv)));
}

void criterion_5() {
    SimConfig cfg;
    cfg.seed = 2026;
    cfg.trials = 10;
    const ValidationReport egv = run_validation(Topology::EGV, MatrixKind::Gram, 128, 128, cfg);
    double worst = 1.0;
    int ok = 0;
    for (const auto& t : egv.trials)
        if (t.status == "ok") {
            worst = std::min(worst, t.cosine);
            ++ok;
        }
    const double med = egv.median_cosine();

    // noise-free, unquantized: gram(128) straight onto conductances
    const Matrix g = generate_matrix(MatrixKind::Gram, 128, 128, 2026);
    const SignedPair sp(g, quiet());
    const double rf = 1.0 / sp.s;
    Rng rng(1);
    const Matrix eff = rf * sp.stack().read(rng);
    const double lambda = power_iteration(eff, 5000, 1e-12).lambda;
    const AnalogResult r = solve_egv(sp.stack(), make_topology(Topology::EGV, rf, lambda), rng);
    const oracle::EigenPairs ep = oracle::jacobi_eigen(oracle::from_eigen(g));
    const double clean = oracle::cosine(oracle::from_eigen(r.v_out), ep.vectors[0]);

    report("5", med >= 0.90 && ok == 10 && clean >= 0.999,
           "gram(128), 10 trials, median cosine " + fmt(med) + " (worst " + fmt(worst) +
               ", need >= 0.90), ok trials " + std::to_string(ok) + "; noise-free unquantized cosine " +
               fmt(clean, 10) + " (need >= 0.999)");
}

void criterion_6a() {
    // 8-bit signed codes and integer inputs through the full compiled
    // pipeline; converters wide enough that their rounding cannot move a
    // result by half a code. Inputs are chosen on the DAC grid:
    // 2^23 - 1 = 47 * 178481, so multiples of top/47 are exact codes.
    SimConfig cfg;
    cfg.noise = false;
    cfg.program_mode = WriteMode::Ideal;
    cfg.bits = 8;
    cfg.converters.dac_bits = 24;
    cfg.converters.adc_bits = 24;
    Rng rng(66);
    std::uniform_int_distribution<int> code(-255, 255);
    std::uniform_int_distribution<int> xin(-47, 47);
    int mismatches = 0;
    int checked = 0;
    double worst_offset = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int rows = 64;
        const int cols = 128;
        Eigen::MatrixXi codes(rows, cols);
        for (auto& c : codes.reshaped()) c = code(rng);
        codes(0, 0) = 255;
        Eigen::VectorXi xi(cols);
        for (auto& v : xi) v = xin(rng);
        xi[0] = 47;
        const Matrix a = codes.cast<double>() / 255.0;
        const Vector x = xi.cast<double>();
        const CompiledSolve cs = compile_solve(Topology::MVM, a, x, cfg);
        MachineState st(cfg.machine(7));
        st.global_buffer = cs.inputs;
        run_program(st, cs.combined());
        const Vector y = decode_solve(cs, st);
        for (int i = 0; i < rows; ++i) {
            long long digital = 0;
            for (int j = 0; j < cols; ++j) digital += static_cast<long long>(codes(i, j)) * xi[j];
            const double analog_codes = y[i] * 255.0;
            worst_offset = std::max(worst_offset, std::abs(analog_codes - static_cast<double>(digital)));
            mismatches += std::llround(analog_codes) != digital;
            ++checked;
        }
    }
    report("6a", mismatches == 0,
           "2-slice analog MVM vs 8-bit integer product, " + std::to_string(checked) + " outputs, mismatches " +
               std::to_string(mismatches) + ", worst distance from the integer " + fmt(worst_offset, 3) +
               " codes");
}

void criterion_6b() {
    const auto t0 = std::chrono::steady_clock::now();
    const io::WeightsFile wf = io::read_weights(kSource + "/data/reference_cnn.bin");
    const io::IdxImages images = io::read_idx_images(kSource + "/data/mnist/subset-1k-images-idx3-ubyte");
    const std::vector<int> labels = io::read_idx_labels(kSource + "/data/mnist/subset-1k-labels-idx1-ubyte");
    SimConfig cfg;
    cfg.seed = 2026;
    cfg.bits = 4;
    const NnResult r4 = nn_infer(wf, images, labels, cfg, 1000);
    cfg.bits = 8;
    const NnResult r8 = nn_infer(wf, images, labels, cfg, 1000);
    const double secs = seconds_since(t0);
    const double a4 = 100 * r4.accuracy_analog();
    const double a8 = 100 * r8.accuracy_analog();
    const double af = 100 * r8.accuracy_float();
    report("6b", a8 >= a4 && af - a8 <= 1.5 && secs < 600,
           "1000 MNIST images: 4-bit " + fmt(a4) + "%, 8-bit " + fmt(a8) + "%, float " + fmt(af) + "% (gap " +
               fmt(af - a8, 3) + " points, need <= 1.5), " + fmt(secs, 3) + " s");
}

void criterion_7() {
    const DeviceParams p = quiet();
    Rng rng(7007);
    std::uniform_int_distribution<int> size(2, 32);
    double worst[4] = {0, 0, 0, 0};
    int done[4] = {0, 0, 0, 0};
    for (int k = 0; k < 50; ++k) {
        const int n = size(rng);
        // MVM
        {
            const SignedPair sp(uniform_matrix(n, n, rng), p);
            const double rf = 1.0 / sp.s;
            const Vector v = uniform_matrix(n, 1, rng).col(0);
            Rng r(k);
            const AnalogResult res = solve_mvm(sp.stack(), v, make_topology(Topology::MVM, rf, 0.0, 1e9), r);
            oracle::Vec ref = oracle::matvec(oracle::transpose(oracle::from_eigen(sp.stack().nominal())),
                                             oracle::from_eigen(v));
            for (double& x : ref) x *= -rf;
            worst[0] = std::max(worst[0], oracle::max_rel_diff(oracle::from_eigen(res.v_out), ref));
            ++done[0];
        }
        // INV
        {
            const Matrix a = uniform_matrix(n, n, rng) + 2.0 * Matrix::Identity(n, n);
            const SignedPair sp(a, p);
            const double rf = 1.0 / sp.s;
            const Vector b = uniform_matrix(n, 1, rng).col(0);
            Rng r(k);
            const AnalogResult res = solve_inv(sp.stack(), b, make_topology(Topology::INV, rf, 0.0, 1e9), r);
            const oracle::Vec ref = oracle::gauss_solve(oracle::from_eigen(Matrix(rf * sp.stack().nominal())),
                                                        oracle::from_eigen(Vector(-b)));
            worst[1] = std::max(worst[1], oracle::max_rel_diff(oracle::from_eigen(res.v_out), ref));
            ++done[1];
        }
        // PINV
        {
            const int m = n + size(rng);
            const Matrix a = uniform_matrix(m, n, rng);
            const SignedPair sa(a, p);
            const SignedPair st(Matrix(a.transpose()), p);
            const double rf = 1.0 / sa.s;
            const Vector b = uniform_matrix(m, 1, rng).col(0);
            Rng r(k);
            const AnalogResult res =
                solve_pinv(sa.stack(), st.stack(), b, make_topology(Topology::PINV, rf, 0.0, 1e9), r);
            const oracle::Vec ref = oracle::least_squares(oracle::from_eigen(Matrix(rf * sa.stack().nominal())),
                                                          oracle::from_eigen(b));
            worst[2] = std::max(worst[2], oracle::max_rel_diff(oracle::from_eigen(res.v_out), ref));
            ++done[2];
        }
        // EGV
        {
            const Matrix x = uniform_matrix(n + 4, n, rng);
            const SignedPair sp(Matrix(x.transpose() * x), p);
            const double rf = 1.0 / sp.s;
            const Matrix eff = rf * sp.stack().nominal();
            const oracle::EigenPairs ep = oracle::jacobi_eigen(oracle::from_eigen(eff));
            Rng r(k);
            const AnalogResult res = solve_egv(sp.stack(), make_topology(Topology::EGV, rf, ep.values[0]), r);
            const oracle::Vec ref = oracle::normalize_max(ep.vectors[0]);
            worst[3] = std::max(worst[3], oracle::max_rel_diff(oracle::from_eigen(res.v_out), ref));
            ++done[3];
        }
    }
    const char* names[] = {"MVM", "INV", "PINV", "EGV"};
    bool ok = true;
    std::string detail = "50 instances each, sizes 2..32, worst relative difference:";
    for (int k = 0; k < 4; ++k) {
        ok = ok && done[k] == 50 && worst[k] <= 1e-9;
        detail += std::string(" ") + names[k] + " " + fmt(worst[k], 3);
    }
    report("7", ok, detail + " (need <= 1e-9)");
}

// The direct pipeline mirrors what the compiled program asks for, using the
// library calls underneath the ISA: write-verify each plane with a seed drawn
// from its macro's stream, drive through the DAC, solve, clamp, ADC.
bool isa_matches_direct(Topology kind, const Matrix& a, const Vector& rhs, const SimConfig& cfg,
                        std::uint64_t machine_seed, std::string& note) {
    CompiledSolve cs = compile_solve(kind, a, rhs, cfg);
    if (kind == Topology::EGV) {
        MachineState probe(cfg.machine(machine_seed));
        probe.global_buffer = cs.inputs;
        run_program(probe, cs.setup);
        attach_egv_lambda(cs, probe, splitmix64(machine_seed ^ 0x5bd1e995ULL));
    }
    MachineState st(cfg.machine(machine_seed));
    st.global_buffer = cs.inputs;
    run_program(st, cs.combined());

    const MachineConfig mc = cfg.machine(machine_seed);
    std::vector<CrossbarArray> arrays;
    std::vector<Rng> rngs;
    for (int m = 0; m < kMacroCount; ++m) {
        arrays.emplace_back(mc.device);
        rngs.push_back(make_stream(machine_seed, static_cast<std::uint64_t>(m)));
    }
    for (const auto& ins : cs.setup) {
        if (ins.opcode != Opcode::WRV) continue;
        const LevelMatrix levels = cs.inputs.at(ins.src).data.cast<int>();
        CrossbarArray& arr = arrays[static_cast<std::size_t>(ins.macro)];
        arr.set_region({0, static_cast<int>(levels.rows()), 0, static_cast<int>(levels.cols())});
        const std::uint64_t seed = rngs[static_cast<std::size_t>(ins.macro)]();
        if (ins.write_mode == WriteMode::Ideal) arr.program_ideal(levels);
        else (void)program_array(arr, levels, mc.write_verify, seed);
    }
    auto stack_of = [&](const std::vector<PlaneTerm>& terms, int self) {
        if (terms.empty()) return PlaneStack(arrays[static_cast<std::size_t>(self)]);
        std::vector<WeightedPlane> planes;
        for (const auto& t : terms) planes.push_back({&arrays[static_cast<std::size_t>(t.macro)], t.weight});
        return PlaneStack(std::move(planes));
    };

    bool same = true;
    std::size_t out_index = 0;
    for (const auto& ins : cs.program) {
        if (ins.opcode != Opcode::CFG) continue;
        const TopologyConfig tc = make_topology(ins.kind, ins.gain, ins.lambda, ins.rail);
        Rng& rng = rngs[static_cast<std::size_t>(ins.macro)];
        const PlaneStack op = stack_of(ins.planes, ins.macro);
        Vector v_out;
        if (kind == Topology::MVM) {
            const Vector x = dac_drive(cs.inputs.at("x").data, mc.converters).row(0).transpose();
            v_out = solve_mvm(op, x, tc, rng).v_out;
        } else if (kind == Topology::INV) {
            const Vector b = dac_drive(cs.inputs.at("b").data, mc.converters).row(0).transpose();
            v_out = solve_inv(op, b, tc, rng).v_out;
        } else if (kind == Topology::PINV) {
            const Vector b = dac_drive(cs.inputs.at("b").data, mc.converters).row(0).transpose();
            v_out = solve_pinv(op, stack_of(ins.tplanes, ins.macro), b, tc, rng).v_out;
        } else {
            v_out = solve_egv(op, tc, rng).v_out;
        }
        const Matrix direct = adc_sample(Matrix(v_out.transpose()), mc.converters);
        const Matrix& isa = st.output_buffer.at(cs.outputs[out_index++].substr(4)).data;
        same = same && isa.rows() == direct.rows() && isa.cols() == direct.cols() && isa == direct;
    }
    note = std::to_string(out_index) + " readout(s)";
    return same && out_index == cs.outputs.size();
}

void criterion_8() {
    SimConfig cfg;  // default noise and write-verify
    cfg.bits = 8;
    Rng rng(8);
    bool ok = true;
    std::string detail = "compiled WRV/CFG/EXE/RDO/HALT programs vs direct library calls, equal seeds:";
    const Matrix w = generate_matrix(MatrixKind::Wishart, 24, 24, 8) + Matrix::Identity(24, 24);
    const Matrix g = generate_matrix(MatrixKind::Gram, 24, 24, 8);
    const RegressionProblem reg = generate_regression(40, 6, 8);
    const Vector x = uniform_matrix(24, 1, rng).col(0);
    struct Case {
        const char* name;
        Topology kind;
        Matrix a;
        Vector rhs;
    };
    const Case cases[] = {{"MVM", Topology::MVM, w, x},
                          {"INV", Topology::INV, w, x},
                          {"PINV", Topology::PINV, reg.design, reg.response},
                          {"EGV", Topology::EGV, g, Vector()}};
    for (const auto& c : cases) {
        std::string note;
        bool same = false;
        try {
            same = isa_matches_direct(c.kind, c.a, c.rhs, cfg, 4242, note);
        } catch (const std::exception& e) {
            note = e.what();
        }
        ok = ok && same;
        detail += std::string(" ") + c.name + (same ? " identical" : " DIFFERENT") + " (" + note + ");";
    }
    report("8", ok, detail);
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_9() {
    const fs::path d = fs::temp_directory_path() / "gramc_acceptance";
    fs::create_directories(d);
    const std::string data = kSource + "/data";
    const std::vector<std::string> invocations = {
        "solve mvm --rows 64 --trials 3 --seed 9",
        "solve egv --rows 32 --trials 2 --seed 9",
        "solve pinv --trials 2 --seed 9 --bits 8",
        "program-demo --cells-per-level 8 --seed 9",
        "nn infer --weights " + data + "/reference_cnn.bin --images " + data +
            "/mnist/subset-1k-images-idx3-ubyte --labels " + data + "/mnist/subset-1k-labels-idx1-ubyte --limit 20 --seed 9",
        "gen regression --rows 16 --cols 3 --seed 9",
    };
    bool ok = true;
    int k = 0;
    for (const auto& args : invocations) {
        const std::string a = (d / ("a" + std::to_string(k) + ".csv")).string();
        const std::string b = (d / ("b" + std::to_string(k) + ".csv")).string();
        ++k;
        const int ra = run_cli(args + " --out " + a);
        const int rb = run_cli(args + " --out " + b);
        const bool same = ra == 0 && rb == 0 && io::read_text_file(a) == io::read_text_file(b) &&
                          !io::read_text_file(a).empty();
        if (!same) std::cout << "  differs or failed: " << args << '\n';
        ok = ok && same;
    }
    report("9", ok, std::to_string(invocations.size()) + " CLI invocations run twice, reports byte-identical: " +
                        (ok ? "yes" : "no"));
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void()>> steps[] = {
        {"1", criterion_1},   {"2", criterion_2},   {"3/4", criterion_3_4}, {"5", criterion_5},
        {"6a", criterion_6a}, {"6b", criterion_6b}, {"7", criterion_7},     {"8", criterion_8},
        {"9", criterion_9},
    };
    for (const auto& [id, fn] : steps) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, false, std::string("threw: ") + e.what());
        }
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion line(s) failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
