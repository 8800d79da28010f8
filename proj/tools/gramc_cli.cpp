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

// gramc: command-line front end for the simulator.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include "gramc/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace gramc;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string noise;
    std::optional<int> bits;
    std::optional<int> trials;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config_path, "flat key = value config file");
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--out", o.out, "report path (stdout when omitted)");
    app->add_option("--noise", o.noise, "device noise on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--bits", o.bits, "weight bits 4|8")->check(CLI::IsMember({4, 8}));
    app->add_option("--trials", o.trials, "number of seeded trials");
}

SimConfig resolve_config(const CommonOptions& o, bool needs_seed) {
    io::KeyValueConfig kv = o.config_path.empty() ? io::KeyValueConfig{} : io::KeyValueConfig::load(o.config_path);
    if (o.seed) kv.set("seed", std::to_string(*o.seed));
    if (!o.noise.empty()) kv.set("noise", o.noise);
    if (o.bits) kv.set("scheme.bits", std::to_string(*o.bits));
    if (o.trials) kv.set("trials", std::to_string(*o.trials));
    const bool seeded = kv.has("seed");
    SimConfig cfg;
    cfg.apply(kv);
    if (needs_seed && cfg.noise && !seeded) throw InputError("a seed is required for noisy runs (--seed or seed = ...)");
    return cfg;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
    } else {
        io::write_text_file(out, text);
    }
}

Vector as_vector(const Matrix& m, const std::string& what) {
    if (m.rows() == 1) return m.row(0).transpose();
    if (m.cols() == 1) return m.col(0);
    throw InputError(what + " must be a single row or column");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavioral simulator of a reconfigurable RRAM analog matrix computing system"};
    app.require_subcommand(1);
    CommonOptions common;

    // solve
    auto* solve = app.add_subcommand("solve", "run one of the four validation experiments");
    add_common(solve, common);
    std::string solve_kind;
    std::string matrix_path;
    std::string rhs_path;
    std::string generator;
    int rows = 128;
    std::optional<int> cols;
    solve->add_option("kind", solve_kind, "mvm|inv|pinv|egv")->required()->check(
        CLI::IsMember({"mvm", "inv", "pinv", "egv"}));
    solve->add_option("--matrix", matrix_path, "matrix text file (overrides the generator)");
    solve->add_option("--rhs", rhs_path, "vector text file for x (mvm) or b (inv, pinv)");
    solve->add_option("--gen", generator, "wishart|gram|regression (default depends on kind)")
        ->check(CLI::IsMember({"wishart", "gram", "regression"}));
    solve->add_option("--rows", rows, "generator rows");
    solve->add_option("--cols", cols, "generator cols (regression only)");

    // nn infer
    auto* nn = app.add_subcommand("nn", "neural network experiments");
    nn->require_subcommand(1);
    auto* infer = nn->add_subcommand("infer", "MNIST inference on programmed macros");
    add_common(infer, common);
    std::string weights_path;
    std::string images_path;
    std::string labels_path;
    int limit = 1000;
    infer->add_option("--weights", weights_path, "weights file")->required();
    infer->add_option("--images", images_path, "IDX image file")->required();
    infer->add_option("--labels", labels_path, "IDX label file")->required();
    infer->add_option("--limit", limit, "number of images (0 = all)");

    // program-demo
    auto* demo = app.add_subcommand("program-demo", "write-verify all 16 levels and report every cell");
    add_common(demo, common);
    int cells_per_level = 256;
    std::string sweep;
    demo->add_option("--cells-per-level", cells_per_level, "cells programmed per level");
    demo->add_option("--sweep", sweep, "emit an unverified pulse staircase instead: set|reset")
        ->check(CLI::IsMember({"set", "reset"}));

    // run
    auto* run = app.add_subcommand("run", "execute an instruction file");
    add_common(run, common);
    std::string program_path;
    std::vector<std::string> loads;
    run->add_option("program", program_path, "program text file")->required();
    run->add_option("--load", loads, "name=file: preload a matrix into the global buffer");

    // gen
    auto* gen = app.add_subcommand("gen", "write a generated matrix");
    add_common(gen, common);
    std::string gen_kind;
    int gen_rows = 128;
    int gen_cols = 128;
    std::string response_out;
    gen->add_option("kind", gen_kind, "wishart|gram|regression")->required()->check(
        CLI::IsMember({"wishart", "gram", "regression"}));
    gen->add_option("--rows", gen_rows, "rows (n for wishart and gram)");
    gen->add_option("--cols", gen_cols, "cols (regression only)");
    gen->add_option("--response-out", response_out, "regression only: where to write the response vector");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) {
            const SimConfig cfg = resolve_config(common, true);
            const Topology kind = parse_topology(solve_kind == "mvm"    ? "MVM"
                                                 : solve_kind == "inv"  ? "INV"
                                                 : solve_kind == "pinv" ? "PINV"
                                                                        : "EGV");
            std::string gen_name = generator;
            if (gen_name.empty()) gen_name = kind == Topology::PINV ? "regression" : kind == Topology::EGV ? "gram" : "wishart";
            const MatrixKind mk = parse_matrix_kind(gen_name);
            const int c = cols.value_or(mk == MatrixKind::Regression ? 6 : rows);
            std::optional<Matrix> fixed;
            std::optional<Vector> fixed_rhs;
            std::string source = gen_name + "(" + std::to_string(rows) +
                                 (mk == MatrixKind::Regression ? "," + std::to_string(c) : std::string()) + ")";
            if (!matrix_path.empty()) {
                fixed = io::read_matrix(matrix_path);
                source = matrix_path;
            }
            if (!rhs_path.empty()) {
                if (!fixed) throw InputError("--rhs needs --matrix");
                fixed_rhs = as_vector(io::read_matrix(rhs_path), "--rhs");
            }
            const ValidationReport rep = run_validation(kind, mk, rows, c, cfg, fixed, fixed_rhs);
            emit(common.out, format_validation_csv(rep, cfg, source));
            for (const auto& t : rep.trials) {
                if (t.status != "ok") {
                    std::cerr << "gramc: " << t.status << '\n';
                    return 2;
                }
            }
            return 0;
        }
        if (infer->parsed()) {
            const SimConfig cfg = resolve_config(common, true);
            const io::WeightsFile wf = io::read_weights(weights_path);
            const io::IdxImages images = io::read_idx_images(images_path);
            const std::vector<int> labels = io::read_idx_labels(labels_path);
            const NnResult r = nn_infer(wf, images, labels, cfg, limit);
            emit(common.out, format_nn_csv(r, cfg, weights_path));
            std::cerr << "accuracy analog " << r.accuracy_analog() << " float " << r.accuracy_float() << '\n';
            return 0;
        }
        if (demo->parsed()) {
            const SimConfig cfg = resolve_config(common, true);
            if (!sweep.empty()) {
                emit(common.out, format_pulse_sweep_csv(cfg, sweep == "set" ? PulseKind::Set : PulseKind::Reset,
                                                        sweep == "set" ? std::vector<double>{0.0, 0.2, 0.4}
                                                                       : std::vector<double>{1.0, 0.8, 0.6}));
                return 0;
            }
            const ProgramDemoResult r = program_demo(cfg, cells_per_level);
            emit(common.out, format_program_demo_csv(r, cfg));
            return 0;
        }
        if (run->parsed()) {
            const SimConfig cfg = resolve_config(common, true);
            const Program program = parse_program(io::read_text_file(program_path));
            MachineState st(cfg.machine(cfg.seed));
            for (const std::string& entry : loads) {
                const auto eq = entry.find('=');
                if (eq == std::string::npos || eq == 0) throw InputError("--load expects name=file");
                const Matrix m = io::read_matrix(entry.substr(eq + 1));
                st.global_buffer[entry.substr(0, eq)] = Buffer{m, m.rows() == 1};
            }
            run_program(st, program);
            emit(common.out, cfg.resolved_comment_block() + format_buffer_dump(st.output_buffer, "out:"));
            return 0;
        }
        if (gen->parsed()) {
            const SimConfig cfg = resolve_config(common, false);
            const MatrixKind mk = parse_matrix_kind(gen_kind);
            if (mk == MatrixKind::Regression) {
                const RegressionProblem p = generate_regression(gen_rows, gen_cols, cfg.seed);
                emit(common.out, io::format_matrix(p.design));
                if (!response_out.empty()) io::write_matrix(response_out, p.response.transpose());
            } else {
                emit(common.out, io::format_matrix(generate_matrix(mk, gen_rows, gen_cols, cfg.seed)));
            }
            return 0;
        }
    } catch (const NumericalError& e) {
        std::cerr << "gramc: numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "gramc: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
