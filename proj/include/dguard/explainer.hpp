#pragma once

#include <future>
#include <span>
#include <vector>

#include "dguard/clustering.hpp"
#include "dguard/detectors.hpp"
#include "dguard/geometry.hpp"
#include "dguard/local_model.hpp"
#include "dguard/objectness.hpp"

namespace dguard {

// Either a detection list or an attack alert; exactly one is meaningful.
struct Verdict {
    bool alert = false;
    std::vector<Detection> detections;
};

namespace detail {

// Shared body: zero each box's mapped region in the scratch copy when the
// original map has any objectness there (overlapping boxes each explain),
// then look for an unexplained cluster.
inline void explain_zero_regions(std::span<const Detection> detections, const ObjectnessMap& om,
                                 const ReceptiveFieldConfig& rf, ObjectnessMap& scratch) {
    scratch = om;
    for (const auto& det : detections) {
        const FeatureBox fb = map_box_to_feature_space(det.box, rf);
        if (fb.empty()) continue;
        long long total = 0;
        for (int i = fb.i_min; i < fb.i_max; ++i)
            for (int j = fb.j_min; j < fb.j_max; ++j) total += om.at(i, j);
        if (total > 0)
            for (int i = fb.i_min; i < fb.i_max; ++i)
                for (int j = fb.j_min; j < fb.j_max; ++j) scratch.at(i, j) = 0;
    }
}

} // namespace detail

// True iff the objectness map holds a cluster no detected box explains.
inline bool explain(std::span<const Detection> detections, const ObjectnessMap& om,
                    const ClusterConfig& ccfg, const ReceptiveFieldConfig& rf) {
    ObjectnessMap scratch;
    detail::explain_zero_regions(detections, om, rf, scratch);
    return has_cluster(scratch, ccfg);
}

// Allocation-reusing variant for sweeps; disk must match the config's eps.
inline bool explain(std::span<const Detection> detections, const ObjectnessMap& om,
                    int min_points, const std::vector<Cell>& disk, const ReceptiveFieldConfig& rf,
                    ObjectnessMap& scratch) {
    detail::explain_zero_regions(detections, om, rf, scratch);
    return has_cluster(scratch, min_points, disk);
}

// The full three-stage defense: conventional detection, robust objectness
// prediction, objectness explaining. Base detection runs concurrently with
// the objectness stage; both are pure.
inline Verdict detector_guard(const Image& image, const std::string& image_id,
                              const BaseDetector& base, const LocalModel& model,
                              const PredictorConfig& pcfg, const ClusterConfig& ccfg) {
    auto detections_future = std::async(std::launch::async, [&] { return base.detect(image_id, image); });
    const LocalLogitsMap logits = extract_local_logits(image, model);
    const ObjectnessMap om = predict_objectness_map(logits, pcfg);

    Verdict verdict;
    std::vector<Detection> detections = detections_future.get();
    if (explain(detections, om, ccfg, logits.cfg)) {
        verdict.alert = true;
    } else {
        verdict.detections = std::move(detections);
    }
    return verdict;
}

} // namespace dguard
