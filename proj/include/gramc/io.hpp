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

// File formats: matrix text, flat key = value config, CSV reports,
// MNIST IDX and the CNN weights container.

#include "gramc/common.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gramc::io {

inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

// -----------------------------------------------------------------------------
// Matrix text: "rows cols" then row-major values.
// -----------------------------------------------------------------------------

inline Matrix parse_matrix(const std::string& text) {
    std::istringstream in(text);
    long rows = 0;
    long cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1) throw InputError("matrix: bad 'rows cols' header");
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
            std::string tok;
            if (!(in >> tok)) throw InputError("matrix: fewer values than rows*cols");
            try {
                std::size_t used = 0;
                m(i, j) = std::stod(tok, &used);
                if (used != tok.size()) throw InputError("");
            } catch (const std::exception&) {
                throw InputError("matrix: bad value '" + tok + "'");
            }
        }
    }
    std::string extra;
    if (in >> extra) throw InputError("matrix: more values than rows*cols");
    return m;
}

inline std::string format_matrix(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            os << format_number(m(i, j));
        }
        os << '\n';
    }
    return os.str();
}

inline Matrix read_matrix(const std::string& path) { return parse_matrix(read_text_file(path)); }
inline void write_matrix(const std::string& path, const Matrix& m) { write_text_file(path, format_matrix(m)); }

// -----------------------------------------------------------------------------
// key = value config
// -----------------------------------------------------------------------------

/// Ordered key/value store that remembers which keys were consumed, so
/// callers can reject anything left over.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text) {
        KeyValueConfig cfg;
        std::istringstream in{std::string(text)};
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
            }
            auto strip = [](std::string s) {
                const auto l = s.find_first_not_of(" \t\r");
                const auto r = s.find_last_not_of(" \t\r");
                return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
            };
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            if (key.empty() || value.empty()) {
                throw InputError("config line " + std::to_string(line_no) + ": empty key or value");
            }
            cfg.set(key, value);
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) { return parse(read_text_file(path)); }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }

    /// Overwrites `out` when the key is present.
    void get(const std::string& key, double& out) {
        if (auto v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stod(*v, &used);
                if (used != v->size()) throw InputError("");
            } catch (const std::exception&) {
                throw InputError("config '" + key + "': not a number: '" + *v + "'");
            }
        }
    }
    void get(const std::string& key, int& out) {
        if (auto v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stoi(*v, &used);
                if (used != v->size()) throw InputError("");
            } catch (const std::exception&) {
                throw InputError("config '" + key + "': not an integer: '" + *v + "'");
            }
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (auto v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stoull(*v, &used);
                if (used != v->size() || v->front() == '-') throw InputError("");
            } catch (const std::exception&) {
                throw InputError("config '" + key + "': not an unsigned integer: '" + *v + "'");
            }
        }
    }
    void get(const std::string& key, std::string& out) {
        if (auto v = take(key)) out = *v;
    }
    void get(const std::string& key, bool& out) {
        if (auto v = take(key)) {
            if (*v == "on" || *v == "true" || *v == "1") out = true;
            else if (*v == "off" || *v == "false" || *v == "0") out = false;
            else throw InputError("config '" + key + "': expected on/off");
        }
    }

    /// Throws InputError naming the first key nobody consumed.
    void reject_unconsumed() const {
        for (const auto& [k, v] : values_) {
            if (!consumed_.contains(k)) throw InputError("config: unknown key '" + k + "'");
        }
    }

private:
    std::optional<std::string> take(const std::string& key) {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

// -----------------------------------------------------------------------------
// MNIST IDX
// -----------------------------------------------------------------------------

struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols

    /// Image k scaled to [0, 1], as a rows x cols matrix.
    [[nodiscard]] Matrix image(int k) const {
        Matrix m(rows, cols);
        const std::size_t base = static_cast<std::size_t>(k) * rows * cols;
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                m(i, j) = pixels[base + static_cast<std::size_t>(i) * cols + j] / 255.0;
        return m;
    }
};

namespace detail {

inline std::uint32_t read_be32(const std::string& bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw InputError("IDX: truncated header");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + k]);
    return v;
}

}  // namespace detail

inline IdxImages parse_idx_images(const std::string& bytes) {
    if (detail::read_be32(bytes, 0) != 0x00000803u) throw InputError("IDX images: bad magic");
    IdxImages img;
    img.count = static_cast<int>(detail::read_be32(bytes, 4));
    img.rows = static_cast<int>(detail::read_be32(bytes, 8));
    img.cols = static_cast<int>(detail::read_be32(bytes, 12));
    const std::size_t n = static_cast<std::size_t>(img.count) * img.rows * img.cols;
    if (bytes.size() != 16 + n) throw InputError("IDX images: payload size does not match the header");
    img.pixels.assign(bytes.begin() + 16, bytes.end());
    return img;
}

inline std::vector<int> parse_idx_labels(const std::string& bytes) {
    if (detail::read_be32(bytes, 0) != 0x00000801u) throw InputError("IDX labels: bad magic");
    const std::size_t n = detail::read_be32(bytes, 4);
    if (bytes.size() != 8 + n) throw InputError("IDX labels: payload size does not match the header");
    std::vector<int> labels(n);
    for (std::size_t k = 0; k < n; ++k) labels[k] = static_cast<std::uint8_t>(bytes[8 + k]);
    return labels;
}

inline IdxImages read_idx_images(const std::string& path) { return parse_idx_images(read_text_file(path)); }
inline std::vector<int> read_idx_labels(const std::string& path) { return parse_idx_labels(read_text_file(path)); }

// -----------------------------------------------------------------------------
// Weights container
//
//   "GRMW" | u32 version (1) | u32 layer_count
//   per layer: u32 kind (0 conv, 1 fc) | u32 ndim | u32 dims[ndim]
//              | f32 input_scale | f32 weights[prod(dims)] | f32 bias[dims[0]]
//
// Little-endian throughout; conv weights are [out, in, k, k], fc [out, in].
// input_scale is the largest input activation magnitude seen in training
// and sets the layer's DAC full scale.
// -----------------------------------------------------------------------------

enum class LayerKind : std::uint32_t { Conv = 0, Fc = 1 };

struct Layer {
    LayerKind kind = LayerKind::Fc;
    std::vector<int> shape;
    float input_scale = 1.0f;
    std::vector<float> weights;
    std::vector<float> bias;

    [[nodiscard]] int out_features() const { return shape.at(0); }
    [[nodiscard]] int in_channels() const { return shape.at(1); }
    [[nodiscard]] int kernel() const { return kind == LayerKind::Conv ? shape.at(2) : 1; }
    /// Flattened fan-in: in * k * k for conv, in for fc.
    [[nodiscard]] int fan_in() const { return in_channels() * kernel() * kernel(); }

    /// Weight matrix as out x fan_in (conv kernels flattened over (in, ky, kx)).
    [[nodiscard]] Matrix weight_matrix() const {
        Matrix w(out_features(), fan_in());
        for (int o = 0; o < out_features(); ++o)
            for (int i = 0; i < fan_in(); ++i)
                w(o, i) = weights[static_cast<std::size_t>(o) * fan_in() + i];
        return w;
    }
    [[nodiscard]] Vector bias_vector() const {
        Vector b(out_features());
        for (int o = 0; o < out_features(); ++o) b[o] = bias[static_cast<std::size_t>(o)];
        return b;
    }
};

struct WeightsFile {
    std::vector<Layer> layers;
};

namespace detail {

class LeReader {
public:
    explicit LeReader(const std::string& bytes) : bytes_(bytes) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + k]);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw InputError("weights: truncated file");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

}  // namespace detail

inline WeightsFile parse_weights(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "GRMW") != 0) throw InputError("weights: bad magic");
    const std::string body = bytes.substr(4);
    detail::LeReader rd(body);
    if (rd.u32() != 1) throw InputError("weights: unsupported version");
    const std::uint32_t count = rd.u32();
    if (count == 0 || count > 64) throw InputError("weights: implausible layer count");
    WeightsFile wf;
    for (std::uint32_t l = 0; l < count; ++l) {
        Layer layer;
        const std::uint32_t kind = rd.u32();
        if (kind > 1) throw InputError("weights: unknown layer kind");
        layer.kind = static_cast<LayerKind>(kind);
        const std::uint32_t ndim = rd.u32();
        if ((layer.kind == LayerKind::Conv && ndim != 4) || (layer.kind == LayerKind::Fc && ndim != 2)) {
            throw InputError("weights: layer rank does not match its kind");
        }
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t dim = rd.u32();
            if (dim == 0 || dim > 65536) throw InputError("weights: bad dimension");
            layer.shape.push_back(static_cast<int>(dim));
            total *= dim;
        }
        if (layer.kind == LayerKind::Conv && layer.shape[2] != layer.shape[3]) {
            throw InputError("weights: only square kernels are supported");
        }
        layer.input_scale = rd.f32();
        if (!(layer.input_scale > 0.0f) || !std::isfinite(layer.input_scale)) {
            throw InputError("weights: input_scale must be finite and > 0");
        }
        layer.weights.resize(total);
        for (auto& w : layer.weights) w = rd.f32();
        layer.bias.resize(static_cast<std::size_t>(layer.shape[0]));
        for (auto& b : layer.bias) b = rd.f32();
        for (float v : layer.weights)
            if (!std::isfinite(v)) throw InputError("weights: non-finite weight");
        for (float v : layer.bias)
            if (!std::isfinite(v)) throw InputError("weights: non-finite bias");
        wf.layers.push_back(std::move(layer));
    }
    if (!rd.done()) throw InputError("weights: trailing bytes");
    return wf;
}

inline std::string serialize_weights(const WeightsFile& wf) {
    std::string out = "GRMW";
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(wf.layers.size()));
    for (const auto& l : wf.layers) {
        detail::put_u32(out, static_cast<std::uint32_t>(l.kind));
        detail::put_u32(out, static_cast<std::uint32_t>(l.shape.size()));
        for (int d : l.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        detail::put_u32(out, std::bit_cast<std::uint32_t>(l.input_scale));
        for (float w : l.weights) detail::put_u32(out, std::bit_cast<std::uint32_t>(w));
        for (float b : l.bias) detail::put_u32(out, std::bit_cast<std::uint32_t>(b));
    }
    return out;
}

inline WeightsFile read_weights(const std::string& path) { return parse_weights(read_text_file(path)); }

}  // namespace gramc::io
