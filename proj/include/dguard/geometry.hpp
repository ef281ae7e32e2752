#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dguard {

// Integer division rounding toward negative infinity / positive infinity.
// Box mapping produces negative intermediate numerators near the image
// border, where plain C++ division (truncation) would be wrong.
inline long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline long long ceil_div(long long a, long long b) {
    return -floor_div(-a, b);
}

// Receptive-field arithmetic shared by every module: a feature cell (i, j)
// depends on the pixel window [i*s, i*s + r) x [j*s, j*s + r).
struct ReceptiveFieldConfig {
    int r = 9;       // receptive-field side in pixels
    int s = 4;       // stride in pixels
    int width = 0;   // image width W
    int height = 0;  // image height H

    int cells_x() const { return (width - r) / s + 1; }
    int cells_y() const { return (height - r) / s + 1; }

    void validate() const {
        if (r < 1 || s < 1) throw std::invalid_argument("receptive field: r and s must be >= 1");
        if (width < r || height < r)
            throw std::invalid_argument("receptive field: image smaller than one field");
    }
};

inline ReceptiveFieldConfig make_rf(int r, int s, int width, int height) {
    ReceptiveFieldConfig cfg{r, s, width, height};
    cfg.validate();
    return cfg;
}

// Axis-aligned pixel box, half-open: [x_min, x_max) x [y_min, y_max).
struct PixelBox {
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    long long area() const {
        return static_cast<long long>(x_max - x_min) * (y_max - y_min);
    }
    bool valid_in(int width, int height) const {
        return 0 <= x_min && x_min < x_max && x_max <= width &&
               0 <= y_min && y_min < y_max && y_max <= height;
    }
    bool contains(const PixelBox& inner) const {
        return x_min <= inner.x_min && inner.x_max <= x_max &&
               y_min <= inner.y_min && inner.y_max <= y_max;
    }
    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct LabeledBox {
    PixelBox box;
    int label = 0;
};

// Feature-space box, half-open in cell coordinates. May be empty after
// clamping (i_min == i_max or j_min == j_max).
struct FeatureBox {
    int i_min = 0, j_min = 0, i_max = 0, j_max = 0;

    bool empty() const { return i_min >= i_max || j_min >= j_max; }
    int width() const { return i_max - i_min; }
    int height() const { return j_max - j_min; }
    long long cell_count() const {
        return empty() ? 0 : static_cast<long long>(width()) * height();
    }
    bool contains(int i, int j) const {
        return i_min <= i && i < i_max && j_min <= j && j < j_max;
    }
    friend bool operator==(const FeatureBox&, const FeatureBox&) = default;
};

inline FeatureBox intersect(const FeatureBox& a, const FeatureBox& b) {
    FeatureBox out{std::max(a.i_min, b.i_min), std::max(a.j_min, b.j_min),
                   std::min(a.i_max, b.i_max), std::min(a.j_max, b.j_max)};
    if (out.empty()) return FeatureBox{};
    return out;
}

// One patch rectangle: top-left pixel (x, y), extent w x h.
struct PatchRect {
    int x = 0, y = 0, w = 0, h = 0;

    PixelBox pixel_box() const { return PixelBox{x, y, x + w, y + h}; }
    friend bool operator==(const PatchRect&, const PatchRect&) = default;
};

// A patch placement: one rectangle in the single-patch threat model,
// several for the multi-patch extension.
struct PatchSpec {
    std::vector<PatchRect> rects;

    void validate(int width, int height) const {
        if (rects.empty()) throw std::invalid_argument("patch: empty rectangle list");
        for (const auto& rc : rects) {
            if (rc.w < 1 || rc.h < 1 || rc.x < 0 || rc.y < 0 ||
                rc.x + rc.w > width || rc.y + rc.h > height)
                throw std::invalid_argument("patch: rectangle outside the image");
        }
    }
};

struct Cell {
    int i = 0, j = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

// The exact set of feature cells an attacker can influence. Stored as a
// canonical disjoint box decomposition so multi-rectangle unions stay
// exact under summation and comparable for deduplication.
class Footprint {
public:
    Footprint() = default;

    explicit Footprint(std::vector<FeatureBox> boxes) {
        boxes.erase(std::remove_if(boxes.begin(), boxes.end(),
                                   [](const FeatureBox& b) { return b.empty(); }),
                    boxes.end());
        if (boxes.size() <= 1) {
            boxes_ = std::move(boxes);
            return;
        }
        boxes_ = decompose(boxes);
    }

    const std::vector<FeatureBox>& boxes() const { return boxes_; }
    bool empty() const { return boxes_.empty(); }

    bool contains(int i, int j) const {
        for (const auto& b : boxes_)
            if (b.contains(i, j)) return true;
        return false;
    }

    long long cell_count() const {
        long long n = 0;
        for (const auto& b : boxes_) n += b.cell_count();
        return n;
    }

    std::vector<Cell> cells() const {
        std::vector<Cell> out;
        out.reserve(static_cast<std::size_t>(cell_count()));
        for (const auto& b : boxes_)
            for (int i = b.i_min; i < b.i_max; ++i)
                for (int j = b.j_min; j < b.j_max; ++j) out.push_back({i, j});
        std::sort(out.begin(), out.end());
        return out;
    }

    // Bounding hull of all cells; empty FeatureBox when the footprint is empty.
    FeatureBox hull() const {
        if (boxes_.empty()) return FeatureBox{};
        FeatureBox h = boxes_.front();
        for (const auto& b : boxes_) {
            h.i_min = std::min(h.i_min, b.i_min);
            h.j_min = std::min(h.j_min, b.j_min);
            h.i_max = std::max(h.i_max, b.i_max);
            h.j_max = std::max(h.j_max, b.j_max);
        }
        return h;
    }

    friend bool operator==(const Footprint&, const Footprint&) = default;

private:
    // Row-sweep union: per row, merged i-intervals; vertically merge equal
    // interval runs back into boxes. Canonical for a given cell set.
    static std::vector<FeatureBox> decompose(const std::vector<FeatureBox>& boxes) {
        int j_lo = boxes.front().j_min, j_hi = boxes.front().j_max;
        for (const auto& b : boxes) {
            j_lo = std::min(j_lo, b.j_min);
            j_hi = std::max(j_hi, b.j_max);
        }
        using Intervals = std::vector<std::pair<int, int>>;
        auto row_intervals = [&](int j) {
            Intervals iv;
            for (const auto& b : boxes)
                if (b.j_min <= j && j < b.j_max) iv.emplace_back(b.i_min, b.i_max);
            std::sort(iv.begin(), iv.end());
            Intervals merged;
            for (const auto& [lo, hi] : iv) {
                if (!merged.empty() && lo <= merged.back().second)
                    merged.back().second = std::max(merged.back().second, hi);
                else
                    merged.emplace_back(lo, hi);
            }
            return merged;
        };

        std::vector<FeatureBox> out;
        Intervals run;
        int run_start = j_lo;
        auto flush = [&](int j_end) {
            for (const auto& [lo, hi] : run)
                out.push_back(FeatureBox{lo, run_start, hi, j_end});
        };
        for (int j = j_lo; j < j_hi; ++j) {
            Intervals cur = row_intervals(j);
            if (cur != run) {
                flush(j);
                run = std::move(cur);
                run_start = j;
            }
        }
        flush(j_hi);
        std::sort(out.begin(), out.end(), [](const FeatureBox& a, const FeatureBox& b) {
            return std::tie(a.j_min, a.i_min) < std::tie(b.j_min, b.i_min);
        });
        return out;
    }

    std::vector<FeatureBox> boxes_;
};

// Pixel box -> feature box, the conservative mapping used for training
// crops and certification crops. With half-open pixel input the inclusive
// pixel maximum is x_max - 1, so the exclusive feature bound becomes
// floor((x_max - 1)/s) + 1. Results are clamped into the grid; the mapped
// set is always a superset of the cells whose fields intersect the box.
inline FeatureBox map_box_to_feature_space(const PixelBox& box, const ReceptiveFieldConfig& cfg) {
    const int X = cfg.cells_x(), Y = cfg.cells_y();
    auto clamp_to = [](long long v, int hi) {
        return static_cast<int>(std::clamp<long long>(v, 0, hi));
    };
    FeatureBox fb;
    fb.i_min = clamp_to(floor_div(box.x_min - cfg.r + 1, cfg.s), X);
    fb.j_min = clamp_to(floor_div(box.y_min - cfg.r + 1, cfg.s), Y);
    fb.i_max = clamp_to(floor_div(box.x_max - 1, cfg.s) + 1, X);
    fb.j_max = clamp_to(floor_div(box.y_max - 1, cfg.s) + 1, Y);
    if (fb.empty()) return FeatureBox{};
    return fb;
}

// Exact corrupted-cell set: cell i intersects pixel range [x, x+w) iff
// ceil((x - r + 1)/s) <= i <= floor((x + w - 1)/s), clamped to the grid.
inline Footprint corrupted_footprint(const PatchSpec& patch, const ReceptiveFieldConfig& cfg) {
    const int X = cfg.cells_x(), Y = cfg.cells_y();
    std::vector<FeatureBox> boxes;
    boxes.reserve(patch.rects.size());
    for (const auto& rc : patch.rects) {
        const long long i_lo = std::max<long long>(0, ceil_div(rc.x - cfg.r + 1, cfg.s));
        const long long i_hi = std::min<long long>(X - 1, floor_div(rc.x + rc.w - 1, cfg.s));
        const long long j_lo = std::max<long long>(0, ceil_div(rc.y - cfg.r + 1, cfg.s));
        const long long j_hi = std::min<long long>(Y - 1, floor_div(rc.y + rc.h - 1, cfg.s));
        if (i_lo > i_hi || j_lo > j_hi) continue;
        boxes.push_back(FeatureBox{static_cast<int>(i_lo), static_cast<int>(j_lo),
                                   static_cast<int>(i_hi) + 1, static_cast<int>(j_hi) + 1});
    }
    return Footprint(std::move(boxes));
}

// Per-dimension upper bound on the footprint extent of a p-pixel patch.
inline int corruption_bound(int p, const ReceptiveFieldConfig& cfg) {
    if (p < 1) throw std::invalid_argument("corruption_bound: p must be >= 1");
    return static_cast<int>(ceil_div(p + cfg.r - 1, cfg.s));
}

inline double iou(const PixelBox& a, const PixelBox& b) {
    const long long iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const long long ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0 || ih <= 0) return 0.0;
    const long long inter = iw * ih;
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace dguard
