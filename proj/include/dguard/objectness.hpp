#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "dguard/geometry.hpp"
#include "dguard/local_model.hpp"
#include "dguard/maps.hpp"

namespace dguard {

struct PredictorConfig {
    int window_x = 6, window_y = 6;  // window size in feature cells
    double threshold = 1.0;          // per-cell binarizing scale T

    void validate() const {
        if (window_x < 1 || window_y < 1)
            throw std::invalid_argument("predictor: window must be >= 1");
        if (!(threshold > 0)) throw std::invalid_argument("predictor: threshold must be > 0");
    }
};

// Sliding-window accumulation engine. The per-window clipped sums and the
// per-cell window accumulation are both 2-D rectangle sums, so the whole
// pipeline runs on two summed-area tables in O(X*Y*N) instead of the naive
// O(X*Y*w_x*w_y*N). Certification re-runs this once per patch location;
// unit tests pin it to the literal accumulation oracle.
class ObjectnessPipeline {
public:
    ObjectnessPipeline(int X, int Y, int object_classes, const PredictorConfig& cfg)
        : X_(X), Y_(Y), N_(object_classes), wx_(cfg.window_x), wy_(cfg.window_y),
          threshold_(cfg.threshold) {
        cfg.validate();
        if (object_classes < 1) throw std::invalid_argument("predictor: need at least one object class");
        if (wx_ > X_ || wy_ > Y_)
            throw std::invalid_argument("predictor: window larger than feature map");
        ox_ = X_ - wx_ + 1;
        oy_ = Y_ - wy_ + 1;
        clipped_.assign(static_cast<std::size_t>(X_) * Y_ * N_, 0.0);
        sat_.assign(static_cast<std::size_t>(X_ + 1) * (Y_ + 1) * N_, 0.0);
        win_.assign(static_cast<std::size_t>(ox_) * oy_ * N_, 0.0);
        win_sat_.assign(static_cast<std::size_t>(ox_ + 1) * (oy_ + 1) * N_, 0.0);
    }

    int grid_x() const { return X_; }
    int grid_y() const { return Y_; }
    int object_classes() const { return N_; }

    // Clips the map's object-class logits into the workspace. Background
    // logits never reach the objectness score (the per-cell max excludes
    // the background class), so they are not carried.
    void load(const LocalLogitsMap& map) {
        if (map.X != X_ || map.Y != Y_ || map.num_object_classes() != N_)
            throw std::invalid_argument("predictor: map shape mismatch");
        for (int i = 0; i < X_; ++i)
            for (int j = 0; j < Y_; ++j) {
                const double* cell = &map.at(i, j, 0);
                double* out = clipped(i, j);
                for (int c = 0; c < N_; ++c) out[c] = cell[c] > 0 ? cell[c] : 0.0;
            }
        rebuild_sat();
    }

    double* clipped(int i, int j) { return clipped_.data() + (static_cast<std::size_t>(i) * Y_ + j) * N_; }
    const double* clipped(int i, int j) const { return clipped_.data() + (static_cast<std::size_t>(i) * Y_ + j) * N_; }

    // Must be called after mutating the clipped grid directly.
    void rebuild_sat() {
        for (int i = 0; i < X_; ++i)
            for (int j = 0; j < Y_; ++j) {
                const double* p = clipped(i, j);
                double* out = sat_at(i + 1, j + 1);
                const double* left = sat_at(i, j + 1);
                const double* up = sat_at(i + 1, j);
                const double* diag = sat_at(i, j);
                for (int c = 0; c < N_; ++c) out[c] = p[c] + left[c] + up[c] - diag[c];
            }
    }

    void compute_clean(ObjectnessMap& out) { compute(nullptr, out); }
    void compute_worst_case(const Footprint& footprint, ObjectnessMap& out) {
        compute(&footprint, out);
    }

private:
    double* sat_at(int i, int j) { return sat_.data() + (static_cast<std::size_t>(i) * (Y_ + 1) + j) * N_; }
    const double* sat_at(int i, int j) const { return sat_.data() + (static_cast<std::size_t>(i) * (Y_ + 1) + j) * N_; }
    double* win_sat_at(int i, int j) { return win_sat_.data() + (static_cast<std::size_t>(i) * (oy_ + 1) + j) * N_; }

    // Sum of clipped logits over cells [i0, i1) x [j0, j1) for class c.
    double rect_sum(int i0, int j0, int i1, int j1, int c) const {
        return sat_at(i1, j1)[c] - sat_at(i0, j1)[c] - sat_at(i1, j0)[c] + sat_at(i0, j0)[c];
    }

    void compute(const Footprint* footprint, ObjectnessMap& out) {
        // Per-window clipped sums; with a footprint, subtract the corrupted
        // cells' contribution (the attacker's exact worst case under the
        // [0, inf) clip). Footprint boxes are disjoint by construction.
        for (int i = 0; i < ox_; ++i) {
            const double* top = sat_at(i, 0);
            const double* bot = sat_at(i + wx_, 0);
            for (int j = 0; j < oy_; ++j) {
                double* w = win_.data() + (static_cast<std::size_t>(i) * oy_ + j) * N_;
                const std::size_t j0 = static_cast<std::size_t>(j) * N_;
                const std::size_t j1 = static_cast<std::size_t>(j + wy_) * N_;
                for (int c = 0; c < N_; ++c)
                    w[c] = bot[j1 + c] - top[j1 + c] - bot[j0 + c] + top[j0 + c];
                if (footprint) {
                    const FeatureBox window{i, j, i + wx_, j + wy_};
                    for (const auto& b : footprint->boxes()) {
                        const FeatureBox ov = intersect(window, b);
                        if (ov.empty()) continue;
                        for (int c = 0; c < N_; ++c)
                            w[c] -= rect_sum(ov.i_min, ov.j_min, ov.i_max, ov.j_max, c);
                    }
                }
            }
        }

        // SAT over window origins; each cell's accumulated score is the sum
        // over all windows containing it.
        for (int i = 0; i < ox_; ++i)
            for (int j = 0; j < oy_; ++j) {
                const double* w = win_.data() + (static_cast<std::size_t>(i) * oy_ + j) * N_;
                double* o = win_sat_at(i + 1, j + 1);
                const double* left = win_sat_at(i, j + 1);
                const double* up = win_sat_at(i + 1, j);
                const double* diag = win_sat_at(i, j);
                for (int c = 0; c < N_; ++c) o[c] = w[c] + left[c] + up[c] - diag[c];
            }

        if (out.X != X_ || out.Y != Y_) out = ObjectnessMap(X_, Y_);
        const double bar = threshold_ * wx_ * wy_;
        for (int x = 0; x < X_; ++x) {
            const int i0 = std::max(0, x - wx_ + 1);
            const int i1 = std::min(x, ox_ - 1) + 1;
            const double* lo = win_sat_.data() + static_cast<std::size_t>(i0) * (oy_ + 1) * N_;
            const double* hi = win_sat_.data() + static_cast<std::size_t>(i1) * (oy_ + 1) * N_;
            std::uint8_t* row = out.cells.data() + static_cast<std::size_t>(x) * Y_;
            for (int y = 0; y < Y_; ++y) {
                const std::size_t j0 = static_cast<std::size_t>(std::max(0, y - wy_ + 1)) * N_;
                const std::size_t j1 = static_cast<std::size_t>(std::min(y, oy_ - 1) + 1) * N_;
                double score = 0.0;
                for (int c = 0; c < N_; ++c) {
                    const double a = hi[j1 + c] - lo[j1 + c] - hi[j0 + c] + lo[j0 + c];
                    if (a > score) score = a;
                }
                row[y] = score > bar ? 1 : 0;
            }
        }
    }

    int X_, Y_, N_;
    int wx_, wy_;
    double threshold_;
    int ox_ = 0, oy_ = 0;
    std::vector<double> clipped_;
    std::vector<double> sat_;
    std::vector<double> win_;
    std::vector<double> win_sat_;
};

inline ObjectnessMap predict_objectness_map(const LocalLogitsMap& map, const PredictorConfig& cfg) {
    ObjectnessPipeline pipe(map.X, map.Y, map.num_object_classes(), cfg);
    pipe.load(map);
    ObjectnessMap om;
    pipe.compute_clean(om);
    return om;
}

inline ObjectnessMap worst_case_objectness_map(const LocalLogitsMap& map, const Footprint& footprint,
                                               const PredictorConfig& cfg) {
    ObjectnessPipeline pipe(map.X, map.Y, map.num_object_classes(), cfg);
    pipe.load(map);
    ObjectnessMap om;
    pipe.compute_worst_case(footprint, om);
    return om;
}

} // namespace dguard
