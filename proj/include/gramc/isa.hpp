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

// Instruction set of the digital control module.
//
// Text form, one instruction per line, '#' starts a comment:
//
//   WRV  macro=<id> src=<buf> [row=<r>] [col=<c>] [mode=verify|ideal]
//   CFG  macro=<id> kind=MVM|INV|PINV|EGV gain=<ohms> [lambda=<x>] [rail=<V>]
//        [planes=<id>:<w>,...] [tplanes=<id>:<w>,...]
//        [row=<r> col=<c> rows=<n> cols=<n>]
//   EXE  macro=<id> [src=<buf>]
//   RDO  macro=<id> dst=<buf>
//   MOV  src=<buf> dst=<buf> [op=copy|transpose|scale|axpy|diff|bias|im2col|flatten]
//        [factor=<x>] [src2=<buf>] [k=<n> h=<n> w=<n>]
//   POOL src=<buf> dst=<buf> h=<n> w=<n>
//   ACT  src=<buf> dst=<buf> [fn=relu]
//   CMP  macro=<id> src=<buf> dst=<buf> [tol=<S>]
//   HALT
//
// Buffer names address the global buffer; an "out:" prefix addresses the
// output buffer.

#include "gramc/amc_core.hpp"
#include "gramc/common.hpp"
#include "gramc/crossbar_array.hpp"

#include <charconv>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gramc {

inline constexpr int kMacroCount = 16;

enum class Opcode { WRV, CFG, EXE, RDO, MOV, POOL, ACT, CMP, HALT };
enum class MovOp { Copy, Transpose, Scale, Axpy, Diff, Bias, Im2col, Flatten };
enum class WriteMode { Verify, Ideal };

struct PlaneTerm {
    int macro = 0;
    double weight = 1.0;
    friend bool operator==(const PlaneTerm&, const PlaneTerm&) = default;
};

struct Instruction {
    Opcode opcode = Opcode::HALT;
    int macro = -1;
    std::string src;
    std::string dst;
    std::string src2;

    // WRV
    int row = 0;
    int col = 0;
    WriteMode write_mode = WriteMode::Verify;

    // CFG
    Topology kind = Topology::MVM;
    double gain = 0.0;
    double lambda = 0.0;
    double rail = 1.0;
    std::vector<PlaneTerm> planes;
    std::vector<PlaneTerm> tplanes;
    std::optional<ActiveRegion> region;

    // MOV / POOL / ACT
    MovOp mov_op = MovOp::Copy;
    double factor = 1.0;
    int k = 0;
    int h = 0;
    int w = 0;
    std::string fn = "relu";

    // CMP
    std::optional<double> tol;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

using Program = std::vector<Instruction>;

inline std::string_view to_string(Opcode op) {
    switch (op) {
        case Opcode::WRV: return "WRV";
        case Opcode::CFG: return "CFG";
        case Opcode::EXE: return "EXE";
        case Opcode::RDO: return "RDO";
        case Opcode::MOV: return "MOV";
        case Opcode::POOL: return "POOL";
        case Opcode::ACT: return "ACT";
        case Opcode::CMP: return "CMP";
        case Opcode::HALT: return "HALT";
    }
    return "?";
}

inline std::string_view to_string(MovOp op) {
    switch (op) {
        case MovOp::Copy: return "copy";
        case MovOp::Transpose: return "transpose";
        case MovOp::Scale: return "scale";
        case MovOp::Axpy: return "axpy";
        case MovOp::Diff: return "diff";
        case MovOp::Bias: return "bias";
        case MovOp::Im2col: return "im2col";
        case MovOp::Flatten: return "flatten";
    }
    return "?";
}

namespace detail {

struct OpcodeShape {
    Opcode op;
    std::set<std::string, std::less<>> required;
    std::set<std::string, std::less<>> optional;
};

inline const std::map<std::string, OpcodeShape, std::less<>>& opcode_table() {
    static const std::map<std::string, OpcodeShape, std::less<>> table = {
        {"WRV", {Opcode::WRV, {"macro", "src"}, {"row", "col", "mode"}}},
        {"CFG",
         {Opcode::CFG,
          {"macro", "kind", "gain"},
          {"lambda", "rail", "planes", "tplanes", "row", "col", "rows", "cols"}}},
        {"EXE", {Opcode::EXE, {"macro"}, {"src"}}},
        {"RDO", {Opcode::RDO, {"macro", "dst"}, {}}},
        {"MOV", {Opcode::MOV, {"src", "dst"}, {"op", "factor", "src2", "k", "h", "w"}}},
        {"POOL", {Opcode::POOL, {"src", "dst", "h", "w"}, {}}},
        {"ACT", {Opcode::ACT, {"src", "dst"}, {"fn"}}},
        {"CMP", {Opcode::CMP, {"macro", "src", "dst"}, {"tol"}}},
        {"HALT", {Opcode::HALT, {}, {}}},
    };
    return table;
}

inline double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw DecodeError("field '" + std::string(key) + "': not a finite number: '" + std::string(v) + "'");
    }
    return out;
}

inline int parse_int(std::string_view key, std::string_view v) {
    int out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw DecodeError("field '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
    }
    return out;
}

inline int parse_macro(std::string_view key, std::string_view v) {
    const int m = parse_int(key, v);
    if (m < 0 || m >= kMacroCount) throw DecodeError("macro id out of range [0,15]: " + std::string(v));
    return m;
}

inline std::vector<PlaneTerm> parse_planes(std::string_view key, std::string_view v) {
    std::vector<PlaneTerm> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        const std::size_t comma = v.find(',', pos);
        const std::string_view item = v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string_view::npos) {
            throw DecodeError("field '" + std::string(key) + "': expected <macro>:<weight>");
        }
        out.push_back({parse_macro(key, item.substr(0, colon)), parse_double(key, item.substr(colon + 1))});
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string format_planes(const std::vector<PlaneTerm>& planes) {
    std::string s;
    for (std::size_t i = 0; i < planes.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(planes[i].macro) + ":" + format_double(planes[i].weight);
    }
    return s;
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Decodes one instruction line (comments already stripped or not).
inline Instruction decode(std::string_view line) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) throw DecodeError("empty instruction");

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const auto b = line.find_first_not_of(" \t", pos);
        if (b == std::string_view::npos) break;
        const auto e = line.find_first_of(" \t", b);
        tokens.push_back(line.substr(b, e == std::string_view::npos ? line.npos : e - b));
        pos = e == std::string_view::npos ? line.size() : e;
    }

    const auto& table = detail::opcode_table();
    const auto it = table.find(tokens.front());
    if (it == table.end()) throw DecodeError("unknown opcode '" + std::string(tokens.front()) + "'");
    const detail::OpcodeShape& shape = it->second;

    std::map<std::string, std::string_view, std::less<>> fields;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string_view::npos || eq == 0 || eq + 1 == tokens[t].size()) {
            throw DecodeError("malformed operand '" + std::string(tokens[t]) + "'");
        }
        const std::string key(tokens[t].substr(0, eq));
        if (!shape.required.contains(key) && !shape.optional.contains(key)) {
            throw DecodeError(std::string(tokens.front()) + ": unknown field '" + key + "'");
        }
        if (!fields.emplace(key, tokens[t].substr(eq + 1)).second) {
            throw DecodeError("duplicate field '" + key + "'");
        }
    }
    for (const auto& req : shape.required) {
        if (!fields.contains(req)) {
            throw DecodeError(std::string(tokens.front()) + ": missing field '" + req + "'");
        }
    }

    Instruction ins;
    ins.opcode = shape.op;
    for (const auto& [key, value] : fields) {
        if (key == "macro") ins.macro = detail::parse_macro(key, value);
        else if (key == "src") ins.src = value;
        else if (key == "dst") ins.dst = value;
        else if (key == "src2") ins.src2 = value;
        else if (key == "row") ins.row = detail::parse_int(key, value);
        else if (key == "col") ins.col = detail::parse_int(key, value);
        else if (key == "mode") {
            if (value == "verify") ins.write_mode = WriteMode::Verify;
            else if (value == "ideal") ins.write_mode = WriteMode::Ideal;
            else throw DecodeError("WRV: unknown mode '" + std::string(value) + "'");
        } else if (key == "kind") {
            try {
                ins.kind = parse_topology(value);
            } catch (const InputError& e) {
                throw DecodeError(e.what());
            }
        } else if (key == "gain") ins.gain = detail::parse_double(key, value);
        else if (key == "lambda") ins.lambda = detail::parse_double(key, value);
        else if (key == "rail") ins.rail = detail::parse_double(key, value);
        else if (key == "planes") ins.planes = detail::parse_planes(key, value);
        else if (key == "tplanes") ins.tplanes = detail::parse_planes(key, value);
        else if (key == "op") {
            bool found = false;
            for (MovOp op : {MovOp::Copy, MovOp::Transpose, MovOp::Scale, MovOp::Axpy, MovOp::Diff, MovOp::Bias,
                             MovOp::Im2col, MovOp::Flatten}) {
                if (value == to_string(op)) {
                    ins.mov_op = op;
                    found = true;
                }
            }
            if (!found) throw DecodeError("MOV: unknown op '" + std::string(value) + "'");
        } else if (key == "factor") ins.factor = detail::parse_double(key, value);
        else if (key == "k") ins.k = detail::parse_int(key, value);
        else if (key == "h") ins.h = detail::parse_int(key, value);
        else if (key == "w") ins.w = detail::parse_int(key, value);
        else if (key == "fn") {
            if (value != "relu") throw DecodeError("ACT: unknown function '" + std::string(value) + "'");
            ins.fn = value;
        } else if (key == "tol") ins.tol = detail::parse_double(key, value);
    }

    if (ins.opcode == Opcode::CFG) {
        const int n_region = static_cast<int>(fields.contains("row")) + fields.contains("col") +
                             fields.contains("rows") + fields.contains("cols");
        if (n_region != 0 && n_region != 4) throw DecodeError("CFG: region needs row, col, rows and cols");
        if (n_region == 4) {
            ins.region = ActiveRegion{ins.row, detail::parse_int("rows", fields.find("rows")->second), ins.col,
                                      detail::parse_int("cols", fields.find("cols")->second)};
        }
        ins.row = 0;
        ins.col = 0;
        if (!(ins.gain > 0.0)) throw DecodeError("CFG: gain must be > 0");
        if (fields.contains("lambda") && ins.kind != Topology::EGV) {
            throw DecodeError("CFG: lambda is only meaningful for EGV");
        }
        if (fields.contains("tplanes") && ins.kind != Topology::PINV) {
            throw DecodeError("CFG: tplanes is only meaningful for PINV");
        }
        if (ins.kind == Topology::PINV && ins.tplanes.empty()) throw DecodeError("CFG: PINV needs tplanes");
    }
    if (ins.opcode == Opcode::MOV) {
        if ((ins.mov_op == MovOp::Bias) != !ins.src2.empty()) {
            throw DecodeError("MOV: src2 is required by op=bias and only by it");
        }
        if (ins.mov_op == MovOp::Im2col && (ins.k < 1 || ins.h < 1 || ins.w < 1)) {
            throw DecodeError("MOV op=im2col needs k, h, w >= 1");
        }
    }
    if (ins.opcode == Opcode::POOL && (ins.h < 1 || ins.w < 1)) throw DecodeError("POOL needs h, w >= 1");
    return ins;
}

/// Canonical text form; decode(encode(i)) == i.
inline std::string encode(const Instruction& ins) {
    std::string s(to_string(ins.opcode));
    auto add = [&](std::string_view key, const std::string& value) {
        s += ' ';
        s += key;
        s += '=';
        s += value;
    };
    switch (ins.opcode) {
        case Opcode::WRV:
            add("macro", std::to_string(ins.macro));
            add("src", ins.src);
            add("row", std::to_string(ins.row));
            add("col", std::to_string(ins.col));
            add("mode", ins.write_mode == WriteMode::Verify ? "verify" : "ideal");
            break;
        case Opcode::CFG:
            add("macro", std::to_string(ins.macro));
            add("kind", std::string(to_string(ins.kind)));
            add("gain", detail::format_double(ins.gain));
            if (ins.kind == Topology::EGV) add("lambda", detail::format_double(ins.lambda));
            add("rail", detail::format_double(ins.rail));
            if (!ins.planes.empty()) add("planes", detail::format_planes(ins.planes));
            if (!ins.tplanes.empty()) add("tplanes", detail::format_planes(ins.tplanes));
            if (ins.region) {
                add("row", std::to_string(ins.region->row_start));
                add("col", std::to_string(ins.region->col_start));
                add("rows", std::to_string(ins.region->row_count));
                add("cols", std::to_string(ins.region->col_count));
            }
            break;
        case Opcode::EXE:
            add("macro", std::to_string(ins.macro));
            if (!ins.src.empty()) add("src", ins.src);
            break;
        case Opcode::RDO:
            add("macro", std::to_string(ins.macro));
            add("dst", ins.dst);
            break;
        case Opcode::MOV:
            add("src", ins.src);
            add("dst", ins.dst);
            add("op", std::string(to_string(ins.mov_op)));
            add("factor", detail::format_double(ins.factor));
            if (!ins.src2.empty()) add("src2", ins.src2);
            if (ins.mov_op == MovOp::Im2col) {
                add("k", std::to_string(ins.k));
                add("h", std::to_string(ins.h));
                add("w", std::to_string(ins.w));
            }
            break;
        case Opcode::POOL:
            add("src", ins.src);
            add("dst", ins.dst);
            add("h", std::to_string(ins.h));
            add("w", std::to_string(ins.w));
            break;
        case Opcode::ACT:
            add("src", ins.src);
            add("dst", ins.dst);
            add("fn", ins.fn);
            break;
        case Opcode::CMP:
            add("macro", std::to_string(ins.macro));
            add("src", ins.src);
            add("dst", ins.dst);
            if (ins.tol) add("tol", detail::format_double(*ins.tol));
            break;
        case Opcode::HALT: break;
    }
    return s;
}

/// Parses program text; blank and comment-only lines are skipped. Errors
/// carry the 1-based line number.
inline Program parse_program(std::string_view text) {
    Program prog;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (!detail::trim(line).empty()) {
            try {
                prog.push_back(decode(line));
            } catch (const DecodeError& e) {
                throw DecodeError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return prog;
}

}  // namespace gramc
