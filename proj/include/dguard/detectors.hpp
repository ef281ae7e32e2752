#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dguard/dataset.hpp"
#include "dguard/geometry.hpp"
#include "dguard/rng.hpp"

namespace dguard {

// A conventional detector being wrapped: accurate on clean images, assumed
// vulnerable to patch hiding. Adapters are stateless after construction and
// deterministic given inputs and seed.
class BaseDetector {
public:
    virtual ~BaseDetector() = default;
    virtual std::vector<Detection> detect(const std::string& image_id, const Image& image) const = 0;
};

// Hypothetical detector backed by ground-truth annotations: always correct
// in the clean setting, confidence 1 everywhere.
class PerfectCleanDetector : public BaseDetector {
public:
    explicit PerfectCleanDetector(const Dataset& ds) {
        for (const auto& img : ds.images) annotations_[img.id] = img.objects;
    }
    explicit PerfectCleanDetector(std::map<std::string, std::vector<LabeledBox>> annotations)
        : annotations_(std::move(annotations)) {}

    std::vector<Detection> detect(const std::string& image_id, const Image&) const override {
        auto it = annotations_.find(image_id);
        if (it == annotations_.end())
            throw std::runtime_error("perfect detector: unknown image id: " + image_id);
        std::vector<Detection> out;
        out.reserve(it->second.size());
        for (const auto& obj : it->second) out.push_back(Detection{obj.box, obj.label, 1.0});
        return out;
    }

private:
    std::map<std::string, std::vector<LabeledBox>> annotations_;
};

// Replays detections produced offline by a real detector (interchange file).
// Unknown image ids yield an empty list, like a detector that found nothing.
class ExternalDetector : public BaseDetector {
public:
    explicit ExternalDetector(const std::string& path) {
        for (auto& rec : read_detections(path)) by_image_[rec.image_id].push_back(rec.det);
    }

    std::vector<Detection> detect(const std::string& image_id, const Image&) const override {
        auto it = by_image_.find(image_id);
        return it == by_image_.end() ? std::vector<Detection>{} : it->second;
    }

private:
    std::map<std::string, std::vector<Detection>> by_image_;
};

// Drops every box below the operating confidence threshold. Keeps the
// detector_guard agnostic of thresholds.
class ThresholdedDetector : public BaseDetector {
public:
    ThresholdedDetector(const BaseDetector& inner, double threshold)
        : inner_(inner), threshold_(threshold) {}

    std::vector<Detection> detect(const std::string& image_id, const Image& image) const override {
        std::vector<Detection> out;
        for (auto& d : inner_.detect(image_id, image))
            if (d.confidence >= threshold_) out.push_back(d);
        return out;
    }

private:
    const BaseDetector& inner_;
    double threshold_;
};

// Worst-case detector behavior for soundness testing: suppresses every box
// matching a victim object (IoU >= tau) and additionally drops a seeded
// subset of the remaining boxes, modeling unconstrained adversarial
// influence on the base detector. Output is always a subset of the wrapped
// detector's output.
class HidingAttackDetector : public BaseDetector {
public:
    HidingAttackDetector(const BaseDetector& inner,
                         std::map<std::string, std::vector<PixelBox>> victims, double iou_tau,
                         double extra_drop_rate = 0.0, std::uint64_t seed = 0)
        : inner_(inner), victims_(std::move(victims)), iou_tau_(iou_tau),
          extra_drop_rate_(extra_drop_rate), seed_(seed) {}

    std::vector<Detection> detect(const std::string& image_id, const Image& image) const override {
        auto dets = inner_.detect(image_id, image);
        const std::vector<PixelBox>* victims = nullptr;
        if (auto it = victims_.find(image_id); it != victims_.end()) victims = &it->second;

        std::uint64_t h = seed_;
        for (char ch : image_id) h = splitmix64(h) ^ static_cast<std::uint64_t>(ch);

        std::vector<Detection> out;
        for (std::size_t k = 0; k < dets.size(); ++k) {
            bool drop = false;
            if (victims)
                for (const auto& v : *victims)
                    if (iou(dets[k].box, v) >= iou_tau_) { drop = true; break; }
            if (!drop && extra_drop_rate_ > 0.0) {
                std::uint64_t cell = h ^ (0x9e3779b97f4a7c15ull * (k + 1));
                const double u = static_cast<double>(splitmix64(cell) >> 11) * 0x1.0p-53;
                drop = u < extra_drop_rate_;
            }
            if (!drop) out.push_back(dets[k]);
        }
        return out;
    }

private:
    const BaseDetector& inner_;
    std::map<std::string, std::vector<PixelBox>> victims_;
    double iou_tau_;
    double extra_drop_rate_;
    std::uint64_t seed_;
};

inline HidingAttackDetector simulate_hiding_attack(const BaseDetector& base,
                                                   std::map<std::string, std::vector<PixelBox>> victims,
                                                   double iou_tau, double extra_drop_rate = 0.0,
                                                   std::uint64_t seed = 0) {
    return HidingAttackDetector(base, std::move(victims), iou_tau, extra_drop_rate, seed);
}

// --- auxiliary false-positive filter -----------------------------------

// Re-classifies a detected box; nullopt marks a degenerate crop.
using BoxClassifier = std::function<std::optional<int>(const PixelBox&)>;

struct AuxResult {
    std::vector<Detection> detections;
    int skipped = 0;  // degenerate crops kept unmodified
};

// Re-classifies every detected box and removes boxes the classifier calls
// background; survivors carry the re-predicted label. Never adds boxes and
// never changes coordinates.
inline AuxResult aux_predictor(const std::vector<Detection>& detections, int background_label,
                               const BoxClassifier& classify) {
    AuxResult res;
    for (const auto& det : detections) {
        const auto relabeled = classify(det.box);
        if (!relabeled) {
            ++res.skipped;
            res.detections.push_back(det);
            continue;
        }
        if (*relabeled == background_label) continue;
        Detection kept = det;
        kept.label = *relabeled;
        res.detections.push_back(kept);
    }
    return res;
}

// The default instantiation: robust window classification over the box's
// mapped feature region.
inline BoxClassifier make_rch_box_classifier(const LocalLogitsMap& logits) {
    return [&logits](const PixelBox& box) -> std::optional<int> {
        const FeatureBox fb = map_box_to_feature_space(box, logits.cfg);
        if (fb.empty()) return std::nullopt;
        return rch(logits, fb).label;
    };
}

} // namespace dguard
