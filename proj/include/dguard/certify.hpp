#pragma once

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dguard/clustering.hpp"
#include "dguard/dataset.hpp"
#include "dguard/detectors.hpp"
#include "dguard/eval.hpp"
#include "dguard/explainer.hpp"
#include "dguard/geometry.hpp"
#include "dguard/objectness.hpp"
#include "dguard/parallel.hpp"

namespace dguard {

enum class PatchCategory { Far, Close, Over };

inline const char* to_string(PatchCategory c) {
    switch (c) {
        case PatchCategory::Far: return "far";
        case PatchCategory::Close: return "close";
        case PatchCategory::Over: return "over";
    }
    return "?";
}

inline PatchCategory parse_category(const std::string& s) {
    if (s == "far") return PatchCategory::Far;
    if (s == "close") return PatchCategory::Close;
    if (s == "over") return PatchCategory::Over;
    throw std::invalid_argument("unknown patch category: " + s);
}

struct ThreatModel {
    PatchCategory category = PatchCategory::Far;
    int close_distance = 8;  // feature-cell threshold separating close from far

    void validate() const {
        if (close_distance <= 0) throw std::invalid_argument("threat model: close_distance must be > 0");
    }
};

// Candidate patch placement: a representative top-left pixel position plus
// the exact corrupted-cell footprint it induces. Placements sharing a
// footprint are certification-equivalent, so enumeration deduplicates on it.
struct PatchLocation {
    int x = 0, y = 0;
    Footprint footprint;
};

// Chebyshev gap between two non-empty feature boxes: the maximum of the
// per-axis cell gaps, 0 when the boxes touch or overlap.
inline int chebyshev_gap(const FeatureBox& a, const FeatureBox& b) {
    const int gx = std::max({0, b.i_min - a.i_max, a.i_min - b.i_max});
    const int gy = std::max({0, b.j_min - a.j_max, a.j_min - b.j_max});
    return std::max(gx, gy);
}

// All top-left pixel positions whose placement falls into the requested
// threat-model category, deduplicated by feature-space footprint:
//   over:  the patch rectangle lies entirely inside the object box;
//   close: not over, and the footprint's feature-space gap to the object's
//          feature box is below close_distance;
//   far:   everything else (including placements no receptive field sees).
inline std::vector<PatchLocation> enumerate_patch_locations(int patch_w, int patch_h,
                                                            const ReceptiveFieldConfig& rf,
                                                            const PixelBox& object,
                                                            const ThreatModel& tm) {
    tm.validate();
    if (patch_w < 1 || patch_h < 1 || patch_w > rf.width || patch_h > rf.height)
        throw std::invalid_argument("enumerate_patch_locations: patch does not fit the image");

    const FeatureBox object_fbox = map_box_to_feature_space(object, rf);
    std::vector<PatchLocation> out;
    std::set<std::vector<std::array<int, 4>>> seen;
    for (int x = 0; x + patch_w <= rf.width; ++x) {
        for (int y = 0; y + patch_h <= rf.height; ++y) {
            const PatchRect rect{x, y, patch_w, patch_h};
            PatchCategory cat;
            if (object.contains(rect.pixel_box())) {
                cat = PatchCategory::Over;
            } else {
                Footprint fp = corrupted_footprint(PatchSpec{{rect}}, rf);
                const int gap = (fp.empty() || object_fbox.empty())
                                    ? std::numeric_limits<int>::max()
                                    : chebyshev_gap(fp.hull(), object_fbox);
                cat = gap < tm.close_distance ? PatchCategory::Close : PatchCategory::Far;
            }
            if (cat != tm.category) continue;

            Footprint fp = corrupted_footprint(PatchSpec{{rect}}, rf);
            std::vector<std::array<int, 4>> key;
            key.reserve(fp.boxes().size());
            for (const auto& b : fp.boxes()) key.push_back({b.i_min, b.j_min, b.i_max, b.j_max});
            if (!seen.insert(std::move(key)).second) continue;
            out.push_back(PatchLocation{x, y, std::move(fp)});
        }
    }
    return out;
}

// Reusable per-image worst-case analysis: one pipeline over the clean
// logits, probed once per patch footprint.
class CertificationSweep {
public:
    CertificationSweep(const LocalLogitsMap& logits, const PredictorConfig& pcfg,
                       const ClusterConfig& ccfg)
        : pipe_(logits.X, logits.Y, logits.num_object_classes(), pcfg),
          min_points_(ccfg.min_points), disk_(detail::disk_offsets(ccfg.eps)) {
        ccfg.validate();
        pipe_.load(logits);
    }

    // Provable analysis of one known patch placement: certified iff the worst-case
    // objectness map still clusters inside the object's feature box.
    bool location_robust(const Footprint& footprint, const FeatureBox& object_fbox) {
        if (object_fbox.empty()) throw std::invalid_argument("dg_pa_one: empty object feature box");
        pipe_.compute_worst_case(footprint, om_);
        crop_ = om_.crop(object_fbox);
        return has_cluster(crop_, min_points_, disk_);
    }

private:
    ObjectnessPipeline pipe_;
    int min_points_;
    std::vector<Cell> disk_;
    ObjectnessMap om_, crop_;
};

inline bool dg_pa_one(const LocalLogitsMap& logits, const Footprint& footprint,
                      const FeatureBox& object_fbox, const PredictorConfig& pcfg,
                      const ClusterConfig& ccfg) {
    CertificationSweep sweep(logits, pcfg, ccfg);
    return sweep.location_robust(footprint, object_fbox);
}

inline bool dg_pa_one(const LocalLogitsMap& logits, const PatchSpec& patch,
                      const FeatureBox& object_fbox, const PredictorConfig& pcfg,
                      const ClusterConfig& ccfg) {
    return dg_pa_one(logits, corrupted_footprint(patch, logits.cfg), object_fbox, pcfg, ccfg);
}

// Returns which ground truth each kept detection explains; used for the
// "clean detection is correct" prerequisite.
inline std::vector<bool> matched_truths(const std::vector<Detection>& detections,
                                        const std::vector<LabeledBox>& truths, double tau) {
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
        if (best >= 0) used[best] = true;
    }
    return used;
}

struct Certificate {
    PixelBox object;
    int label = 0;
    int n_locations = 0;
    bool clean_ok = false;   // correct clean detection and no false alert
    bool certified = false;
    bool has_failing = false;
    int failing_x = 0, failing_y = 0;  // first failing patch position
};

// Full per-object provable analysis over a location set. The object is
// identified by index into the image's ground truth so the clean-detection
// prerequisite uses the same single-use matching as the metric suite.
inline Certificate dg_pa(const Image& image, const std::string& image_id,
                         const std::vector<LabeledBox>& truths, std::size_t object_index,
                         const std::vector<PatchLocation>& locations, const LocalModel& model,
                         const BaseDetector& base, const PredictorConfig& pcfg,
                         const ClusterConfig& ccfg, double iou_tau) {
    Certificate cert;
    cert.object = truths.at(object_index).box;
    cert.label = truths[object_index].label;
    cert.n_locations = static_cast<int>(locations.size());

    const Verdict verdict = detector_guard(image, image_id, base, model, pcfg, ccfg);
    if (verdict.alert) return cert;
    if (!matched_truths(verdict.detections, truths, iou_tau)[object_index]) return cert;
    cert.clean_ok = true;

    const LocalLogitsMap logits = extract_local_logits(image, model);
    const FeatureBox fbox = map_box_to_feature_space(cert.object, logits.cfg);
    CertificationSweep sweep(logits, pcfg, ccfg);
    cert.certified = true;
    for (const auto& loc : locations) {
        if (!sweep.location_robust(loc.footprint, fbox)) {
            cert.certified = false;
            cert.has_failing = true;
            cert.failing_x = loc.x;
            cert.failing_y = loc.y;
            break;
        }
    }
    return cert;
}

// --- dataset-level drivers ---------------------------------------------

// Per-image inputs shared by detect, eval and certify: clean logits and
// objectness, all base detections, and the alert threshold over the grid.
struct ImagePipelineRecord {
    ImageEvalRecord eval;
    LocalLogitsMap logits;
    ObjectnessMap om;
};

inline std::vector<ImagePipelineRecord> run_clean_pipeline(const Dataset& ds, const LocalModel& model,
                                                           const BaseDetector& base,
                                                           const PredictorConfig& pcfg,
                                                           const ClusterConfig& ccfg,
                                                           const EvalConfig& ecfg, int jobs = 1) {
    ecfg.validate();
    std::vector<ImagePipelineRecord> records(ds.images.size());
    parallel_for(ds.images.size(), jobs, [&](std::size_t k) {
        const AnnotatedImage& ai = ds.images[k];
        ImagePipelineRecord& rec = records[k];
        rec.logits = extract_local_logits(ai.image, model);
        rec.om = predict_objectness_map(rec.logits, pcfg);
        rec.eval.image_id = ai.id;
        rec.eval.truths = ai.objects;
        rec.eval.detections = base.detect(ai.id, ai.image);
        std::stable_sort(rec.eval.detections.begin(), rec.eval.detections.end(),
                         [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });

        rec.eval.alert_from = std::numeric_limits<double>::infinity();
        std::vector<Detection> kept;
        for (double t : ecfg.confidence_grid) {
            kept.clear();
            for (const auto& d : rec.eval.detections)
                if (d.confidence >= t) kept.push_back(d);
            if (explain(kept, rec.om, ccfg, rec.logits.cfg)) {
                rec.eval.alert_from = t;
                break;  // alerting is monotone in the threshold
            }
        }
    });
    return records;
}

struct CertRow {
    std::string image_id;
    int object_id = 0;
    int label = 0;
    PatchCategory category = PatchCategory::Far;
    int n_locations = 0;
    bool certified = false;
    bool has_failing = false;
    int failing_x = 0, failing_y = 0;
};

struct CategoryStat {
    long objects = 0;
    long certified = 0;
    double cr() const { return objects == 0 ? 0.0 : static_cast<double>(certified) / objects; }
};

struct CertifyOptions {
    int patch_w = 24, patch_h = 24;
    std::vector<PatchCategory> categories{PatchCategory::Far, PatchCategory::Close,
                                          PatchCategory::Over};
    int close_distance = 8;
    int jobs = 1;
    std::optional<double> confidence_threshold;  // defaults to the anchor operating point
};

struct CertifyResult {
    std::vector<CertRow> rows;
    std::map<PatchCategory, CategoryStat> by_category;
    std::map<std::pair<PatchCategory, int>, CategoryStat> by_class;
    AnchorPick operating;  // confidence threshold used for the clean prerequisite

    double certified_recall(PatchCategory cat) const {
        auto it = by_category.find(cat);
        return it == by_category.end() ? 0.0 : it->second.cr();
    }
};

// The certified-recall experiment: pick the operating confidence threshold
// achieving the requested clean recall, check the clean prerequisite per
// object, then sweep every deduplicated patch location per category.
inline CertifyResult certify_dataset(const Dataset& ds, const LocalModel& model,
                                     const BaseDetector& base, const PredictorConfig& pcfg,
                                     const ClusterConfig& ccfg, const EvalConfig& ecfg,
                                     const CertifyOptions& opt) {
    const auto records = run_clean_pipeline(ds, model, base, pcfg, ccfg, ecfg, opt.jobs);

    std::vector<ImageEvalRecord> eval_records;
    eval_records.reserve(records.size());
    for (const auto& rec : records) eval_records.push_back(rec.eval);
    const auto sweep_points = threshold_sweep(eval_records, ecfg);

    CertifyResult result;
    result.operating = far_at_recall(sweep_points, ecfg.recall_anchor);
    const double op_t = opt.confidence_threshold.value_or(result.operating.threshold);

    // Clean prerequisite per image at the operating threshold.
    struct CleanState {
        bool alerted = false;
        std::vector<bool> matched;
    };
    std::vector<CleanState> clean(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& rec = records[k];
        clean[k].alerted = op_t >= rec.eval.alert_from;
        std::vector<Detection> kept;
        for (const auto& d : rec.eval.detections)
            if (d.confidence >= op_t) kept.push_back(d);
        clean[k].matched = clean[k].alerted ? std::vector<bool>(rec.eval.truths.size(), false)
                                            : matched_truths(kept, rec.eval.truths, ecfg.iou_tau);
    }

    struct Task {
        std::size_t image_idx;
        std::size_t object_idx;
        PatchCategory category;
    };
    std::vector<Task> tasks;
    for (std::size_t k = 0; k < records.size(); ++k)
        for (std::size_t o = 0; o < records[k].eval.truths.size(); ++o)
            for (PatchCategory cat : opt.categories) tasks.push_back({k, o, cat});

    std::vector<CertRow> rows(tasks.size());
    parallel_for(tasks.size(), opt.jobs, [&](std::size_t t) {
        const Task& task = tasks[t];
        const auto& rec = records[task.image_idx];
        const LabeledBox& object = rec.eval.truths[task.object_idx];

        CertRow row;
        row.image_id = rec.eval.image_id;
        row.object_id = static_cast<int>(task.object_idx);
        row.label = object.label;
        row.category = task.category;

        const ThreatModel tm{task.category, opt.close_distance};
        const auto locations = enumerate_patch_locations(opt.patch_w, opt.patch_h, rec.logits.cfg,
                                                         object.box, tm);
        row.n_locations = static_cast<int>(locations.size());

        const CleanState& cs = clean[task.image_idx];
        if (!cs.alerted && cs.matched[task.object_idx]) {
            const FeatureBox fbox = map_box_to_feature_space(object.box, rec.logits.cfg);
            CertificationSweep sweep(rec.logits, pcfg, ccfg);
            row.certified = true;
            for (const auto& loc : locations) {
                if (!sweep.location_robust(loc.footprint, fbox)) {
                    row.certified = false;
                    row.has_failing = true;
                    row.failing_x = loc.x;
                    row.failing_y = loc.y;
                    break;
                }
            }
        }
        rows[t] = std::move(row);
    });

    for (const auto& row : rows) {
        auto& cat_stat = result.by_category[row.category];
        ++cat_stat.objects;
        cat_stat.certified += row.certified ? 1 : 0;
        auto& cls_stat = result.by_class[{row.category, row.label}];
        ++cls_stat.objects;
        cls_stat.certified += row.certified ? 1 : 0;
    }
    result.rows = std::move(rows);
    return result;
}

} // namespace dguard
