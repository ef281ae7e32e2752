#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dguard/dataset.hpp"
#include "dguard/geometry.hpp"

namespace dguard {

struct EvalConfig {
    double iou_tau = 0.5;
    std::vector<double> confidence_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double recall_anchor = 0.8;

    void validate() const {
        if (!(iou_tau > 0.0) || iou_tau > 1.0) throw std::invalid_argument("eval: iou_tau must be in (0, 1]");
        if (confidence_grid.empty()) throw std::invalid_argument("eval: empty confidence grid");
        if (!std::is_sorted(confidence_grid.begin(), confidence_grid.end()))
            throw std::invalid_argument("eval: confidence grid must be sorted ascending");
    }
};

struct MatchCounts {
    long tp = 0, fp = 0, fn = 0;
};

// Greedy matching by descending confidence: a detection is a true positive
// when its label matches and its IoU with a still-unmatched ground truth
// reaches tau (best IoU wins, lowest index on ties). On alerted images no
// box is output, so TP and FP are zero and every ground truth counts as FN.
inline MatchCounts match_detections(const std::vector<Detection>& detections,
                                    const std::vector<LabeledBox>& truths, double tau,
                                    bool alerted = false) {
    MatchCounts counts;
    if (alerted) {
        counts.fn = static_cast<long>(truths.size());
        return counts;
    }
    std::vector<std::size_t> order(detections.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].confidence > detections[b].confidence;
    });

    std::vector<bool> used(truths.size(), false);
    for (std::size_t k : order) {
        const Detection& det = detections[k];
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < truths.size(); ++g) {
            if (used[g] || truths[g].label != det.label) continue;
            const double v = iou(det.box, truths[g].box);
            if (v >= tau && v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best >= 0) {
            used[best] = true;
            ++counts.tp;
        } else {
            ++counts.fp;
        }
    }
    counts.fn = static_cast<long>(truths.size()) - counts.tp;
    return counts;
}

// Threshold-independent per-image inputs for the confidence sweep: all base
// detections plus the smallest grid threshold at which the explainer alerts
// (alerting is monotone in the threshold since removing boxes only leaves
// more objectness unexplained).
struct ImageEvalRecord {
    std::string image_id;
    std::vector<Detection> detections;
    std::vector<LabeledBox> truths;
    double alert_from = std::numeric_limits<double>::infinity();
};

struct SweepPoint {
    double threshold = 0.0;
    long tp = 0, fp = 0, fn = 0;
    long alerts = 0, images = 0;
    double precision = 1.0, recall = 0.0, far = 0.0;
};

inline std::vector<SweepPoint> threshold_sweep(const std::vector<ImageEvalRecord>& records,
                                               const EvalConfig& cfg) {
    cfg.validate();
    std::vector<SweepPoint> points;
    points.reserve(cfg.confidence_grid.size());
    for (double t : cfg.confidence_grid) {
        SweepPoint pt;
        pt.threshold = t;
        pt.images = static_cast<long>(records.size());
        for (const auto& rec : records) {
            const bool alerted = t >= rec.alert_from;
            std::vector<Detection> kept;
            if (!alerted)
                for (const auto& d : rec.detections)
                    if (d.confidence >= t) kept.push_back(d);
            const MatchCounts counts = match_detections(kept, rec.truths, cfg.iou_tau, alerted);
            pt.tp += counts.tp;
            pt.fp += counts.fp;
            pt.fn += counts.fn;
            pt.alerts += alerted ? 1 : 0;
        }
        pt.precision = (pt.tp + pt.fp) == 0 ? 1.0 : static_cast<double>(pt.tp) / (pt.tp + pt.fp);
        pt.recall = (pt.tp + pt.fn) == 0 ? 0.0 : static_cast<double>(pt.tp) / (pt.tp + pt.fn);
        pt.far = pt.images == 0 ? 0.0 : static_cast<double>(pt.alerts) / pt.images;
        points.push_back(pt);
    }
    return points;
}

// All-point interpolated average precision: the area under the
// precision-recall points, with interpolated precision at each achieved
// recall level taken as the maximum precision among operating points of at
// least that recall. Invariant under duplicated grid points.
inline double average_precision(const std::vector<SweepPoint>& points) {
    if (points.empty()) throw std::invalid_argument("average_precision: empty sweep");
    std::vector<std::pair<double, double>> rp;
    rp.reserve(points.size());
    for (const auto& pt : points) rp.emplace_back(pt.recall, pt.precision);
    std::sort(rp.begin(), rp.end());

    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < rp.size(); ++k) {
        if (k + 1 < rp.size() && rp[k + 1].first == rp[k].first) continue;  // keep last of equal recalls
        const double recall = rp[k].first;
        if (recall <= prev_recall) continue;
        double interp = 0.0;
        for (const auto& [r, p] : rp)
            if (r >= recall) interp = std::max(interp, p);
        ap += (recall - prev_recall) * interp;
        prev_recall = recall;
    }
    return ap;
}

struct AnchorPick {
    double value = 0.0;      // FAR at the picked operating point
    double threshold = 0.0;  // picked confidence threshold
    double recall = 0.0;     // clean recall there
    bool reachable = true;   // false when no threshold attains the anchor
};

// Operating point for FAR@0.x / CR@0.x: the largest confidence threshold
// whose clean recall still reaches the anchor, i.e. the point at the anchor
// recall. Recall is antitone in the threshold (fewer boxes, more alerts),
// so this is the unique boundary point. When the anchor is unreachable the
// nearest achievable point (maximum recall) is returned and flagged.
inline AnchorPick far_at_recall(const std::vector<SweepPoint>& points, double anchor) {
    if (points.empty()) throw std::invalid_argument("far_at_recall: empty sweep");
    const SweepPoint* pick = nullptr;
    for (const auto& pt : points)
        if (pt.recall >= anchor && (!pick || pt.threshold > pick->threshold)) pick = &pt;
    AnchorPick out;
    if (!pick) {
        out.reachable = false;
        for (const auto& pt : points)
            if (!pick || pt.recall > pick->recall) pick = &pt;
    }
    out.value = pick->far;
    out.threshold = pick->threshold;
    out.recall = pick->recall;
    return out;
}

} // namespace dguard
