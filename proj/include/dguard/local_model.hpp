#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/geometry.hpp"
#include "dguard/image.hpp"
#include "dguard/maps.hpp"
#include "dguard/rng.hpp"

namespace dguard {

// Worst-case bounds of the clipped window aggregation. Under the [0, +inf)
// clip range only the lower bound is informative; the upper bound is kept as
// an explicit +infinity marker and never consumed downstream.
struct LogitsBounds {
    std::vector<double> lower;
    std::vector<double> upper;
};

namespace detail {

constexpr int kProjectionDims = 8;
constexpr std::uint64_t kDescriptorSeed = 0x6447u;

// Fixed random projection of the raw window pixels, shared by every model
// with the same (r, channels). Entries are scaled by 1/r^2 so projections
// stay the same order of magnitude as channel means. Layout is
// [pixel * kProjectionDims + k] so the extraction inner loop is contiguous.
inline std::vector<double> make_projection(int r, int channels) {
    Rng rng(derive_seed(kDescriptorSeed, static_cast<std::uint64_t>(r) * 131 + channels));
    std::vector<double> m(static_cast<std::size_t>(kProjectionDims) * r * r * channels);
    const double scale = 1.0 / (static_cast<double>(r) * r);
    for (std::size_t pix = 0; pix < m.size() / kProjectionDims; ++pix)
        for (int k = 0; k < kProjectionDims; ++k)
            m[pix * kProjectionDims + k] = rng.uniform(-1.0, 1.0) * scale;
    return m;
}

} // namespace detail

// The small-receptive-field classifier: a fixed per-window descriptor
// (per-channel mean and variance plus a seeded random projection) followed
// by a trained (N+1)-way linear head. Immutable once trained or loaded.
struct LocalModel {
    int r = 9;
    int s = 4;
    int num_classes = 3;  // N object classes; background is index N
    int channels = 3;
    std::vector<double> weights;  // (N+1) x F, class-major
    std::vector<double> bias;     // N+1
    std::vector<double> projection;

    int feature_dim() const { return 2 * channels + detail::kProjectionDims; }
    int head_classes() const { return num_classes + 1; }

    const double* class_weights(int c) const { return weights.data() + static_cast<std::size_t>(c) * feature_dim(); }
    double* class_weights(int c) { return weights.data() + static_cast<std::size_t>(c) * feature_dim(); }

    void init_storage() {
        weights.assign(static_cast<std::size_t>(head_classes()) * feature_dim(), 0.0);
        bias.assign(head_classes(), 0.0);
        projection = detail::make_projection(r, channels);
    }

    ReceptiveFieldConfig rf_for(const Image& img) const { return make_rf(r, s, img.width, img.height); }

    // Descriptor of the r x r window whose top-left pixel is (x0, y0).
    // Layout: [mean_0..mean_{C-1}, var_0..var_{C-1}, proj_0..proj_7].
    void window_descriptor(const Image& img, int x0, int y0, double* out) const {
        const int C = channels;
        const int F = feature_dim();
        for (int f = 0; f < F; ++f) out[f] = 0.0;
        const double inv_n = 1.0 / (static_cast<double>(r) * r);
        double* proj_out = out + 2 * C;
        for (int dy = 0; dy < r; ++dy) {
            const float* row = img.data.data() + (static_cast<std::size_t>(y0 + dy) * img.width + x0) * C;
            const double* proj = projection.data() +
                                 static_cast<std::size_t>(dy) * r * C * detail::kProjectionDims;
            for (int dx = 0; dx < r; ++dx) {
                for (int c = 0; c < C; ++c) {
                    const double v = row[dx * C + c];
                    out[c] += v;
                    out[C + c] += v * v;
                    for (int k = 0; k < detail::kProjectionDims; ++k) proj_out[k] += proj[k] * v;
                    proj += detail::kProjectionDims;
                }
            }
        }
        for (int c = 0; c < C; ++c) {
            out[c] *= inv_n;
            out[C + c] = out[C + c] * inv_n - out[c] * out[c];
        }
    }

    void head_logits(const double* descriptor, double* out) const {
        const int F = feature_dim();
        for (int c = 0; c < head_classes(); ++c) {
            double z = bias[c];
            const double* w = class_weights(c);
            for (int f = 0; f < F; ++f) z += w[f] * descriptor[f];
            out[c] = z;
        }
    }
};

inline LocalModel make_local_model(int r, int s, int num_classes, int channels = 3) {
    LocalModel m;
    m.r = r;
    m.s = s;
    m.num_classes = num_classes;
    m.channels = channels;
    m.init_storage();
    return m;
}

// Per-location local logits: every feature cell's window descriptor passed
// through the linear head. Deterministic; cells are independent.
inline LocalLogitsMap extract_local_logits(const Image& image, const LocalModel& model) {
    const ReceptiveFieldConfig cfg = model.rf_for(image);
    const int X = cfg.cells_x(), Y = cfg.cells_y();
    LocalLogitsMap map(X, Y, model.head_classes());
    map.cfg = cfg;
    std::vector<double> descriptor(model.feature_dim());
    for (int i = 0; i < X; ++i) {
        for (int j = 0; j < Y; ++j) {
            model.window_descriptor(image, i * cfg.s, j * cfg.s, descriptor.data());
            model.head_logits(descriptor.data(), &map.at(i, j, 0));
        }
    }
    return map;
}

// Recomputes the logits of a single cell (used when only a few cells of an
// image changed; cells outside the patch footprint cannot be affected).
inline void extract_cell_logits(const Image& image, const LocalModel& model, int i, int j,
                                double* out, double* descriptor_scratch) {
    const ReceptiveFieldConfig cfg = model.rf_for(image);
    model.window_descriptor(image, i * cfg.s, j * cfg.s, descriptor_scratch);
    model.head_logits(descriptor_scratch, out);
}

struct RchResult {
    int label = 0;
    std::vector<double> v;
};

// Robust classification head: clip every local logit into [0, +inf) and sum
// over the window. Ties in the argmax break toward the smallest class index.
inline RchResult rch(const LocalLogitsMap& map, const FeatureBox& window) {
    if (window.empty()) throw std::invalid_argument("rch: empty window");
    RchResult res;
    res.v.assign(map.classes, 0.0);
    for (int i = window.i_min; i < window.i_max; ++i)
        for (int j = window.j_min; j < window.j_max; ++j) {
            const double* cell = &map.at(i, j, 0);
            for (int c = 0; c < map.classes; ++c)
                if (cell[c] > 0) res.v[c] += cell[c];
        }
    res.label = 0;
    for (int c = 1; c < map.classes; ++c)
        if (res.v[c] > res.v[res.label]) res.label = c;
    return res;
}

// Provable-analysis variant: the attacker can drive any corrupted logit to
// the clip floor, so the lower bound zeroes corrupted cells and sums the
// rest; no finite upper bound exists under the [0, +inf) clip.
inline LogitsBounds rch_pa(const LocalLogitsMap& map, const FeatureBox& window,
                           const Footprint& corrupted) {
    LogitsBounds b;
    b.lower.assign(map.classes, 0.0);
    b.upper.assign(map.classes, std::numeric_limits<double>::infinity());
    for (int i = window.i_min; i < window.i_max; ++i)
        for (int j = window.j_min; j < window.j_max; ++j) {
            if (corrupted.contains(i, j)) continue;
            const double* cell = &map.at(i, j, 0);
            for (int c = 0; c < map.classes; ++c)
                if (cell[c] > 0) b.lower[c] += cell[c];
        }
    return b;
}

// --- model file -------------------------------------------------------
//
// Text format, bit-exact round trip:
//   CGMODEL v1 <r> <s> <N> <F>
// followed by (N+1)*F weights (class-major) then N+1 biases, one decimal
// per line. Doubles are printed with 17 significant digits so parsing
// recovers the exact bit pattern.

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline std::string encode_model(const LocalModel& m) {
    std::string out = "CGMODEL v1 " + std::to_string(m.r) + " " + std::to_string(m.s) + " " +
                      std::to_string(m.num_classes) + " " + std::to_string(m.feature_dim()) + "\n";
    for (double w : m.weights) out += detail::format_double(w) + "\n";
    for (double b : m.bias) out += detail::format_double(b) + "\n";
    return out;
}

inline void save_model(const std::string& path, const LocalModel& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("model: cannot open for writing: " + path);
    const std::string text = encode_model(m);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("model: write failed: " + path);
}

inline LocalModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("model: cannot open: " + path);
    std::string magic, version;
    int r = 0, s = 0, n = 0, feat = 0;
    f >> magic >> version >> r >> s >> n >> feat;
    if (magic != "CGMODEL" || version != "v1")
        throw std::runtime_error("model: bad header: " + path);
    if (r < 1 || s < 1 || n < 1) throw std::runtime_error("model: bad dimensions: " + path);
    const int c2 = feat - detail::kProjectionDims;
    if (c2 < 2 || c2 % 2 != 0) throw std::runtime_error("model: inconsistent feature dim: " + path);
    LocalModel m = make_local_model(r, s, n, c2 / 2);
    for (auto& w : m.weights)
        if (!(f >> w)) throw std::runtime_error("model: truncated weights: " + path);
    for (auto& b : m.bias)
        if (!(f >> b)) throw std::runtime_error("model: truncated biases: " + path);
    return m;
}

} // namespace dguard
