#pragma once

#include <string>
#include <vector>

#include "dguard/certify.hpp"
#include "dguard/dataset.hpp"
#include "dguard/detectors.hpp"
#include "dguard/explainer.hpp"
#include "dguard/geometry.hpp"
#include "dguard/local_model.hpp"
#include "dguard/objectness.hpp"
#include "dguard/rng.hpp"

namespace dguard {

struct AttackOracleConfig {
    int feature_random = 100;   // seeded random feature-space assignments per location
    int pixel_variants = 20;    // patched-pixel variants per location
    std::uint64_t seed = 99;
    double extra_drop_rate = 0.5;  // drop rate of the randomized detector behaviors
    int random_behaviors = 2;      // seeded-drop behaviors beyond victim-only and drop-all
};

inline std::uint64_t hash_image_id(const std::string& id) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : id) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Feature-space attack surface: every assignment of arbitrary reals to the
// corrupted cells. Yields the analytic worst case (all footprint logits
// forced below the clip floor), per-class suppression patterns, and seeded
// wide-range random assignments. Cells outside the footprint are never
// touched.
inline std::vector<LocalLogitsMap> feature_space_attack(const LocalLogitsMap& logits,
                                                        const Footprint& footprint,
                                                        int random_count, std::uint64_t seed) {
    std::vector<LocalLogitsMap> variants;
    const auto cells = footprint.cells();
    if (cells.empty()) {
        variants.push_back(logits);  // nothing the attacker can reach
        return variants;
    }

    LocalLogitsMap worst = logits;
    for (const auto& cell : cells)
        for (int c = 0; c < logits.classes; ++c) worst.at(cell.i, cell.j, c) = -1e9;
    variants.push_back(std::move(worst));

    for (int c = 0; c < logits.classes; ++c) {
        LocalLogitsMap v = logits;
        for (const auto& cell : cells) v.at(cell.i, cell.j, c) = -1e9;
        variants.push_back(std::move(v));
    }

    Rng rng(derive_seed(seed, 0xFEA7));
    for (int k = 0; k < random_count; ++k) {
        LocalLogitsMap v = logits;
        for (const auto& cell : cells)
            for (int c = 0; c < logits.classes; ++c)
                v.at(cell.i, cell.j, c) = rng.uniform(-1000.0, 1000.0);
        variants.push_back(std::move(v));
    }
    return variants;
}

namespace detail {

// Patch content for pixel variant k: three solid fills, then alternating
// seeded uniform noise and salt-and-pepper (high contrast) noise.
inline float pixel_variant_value(int k, Rng& rng) {
    static constexpr float kSolids[3] = {0.0f, 1.0f, 0.5f};
    if (k < 3) return kSolids[k];
    if (k % 2 == 1) return static_cast<float>(rng.next_double());
    return rng.bernoulli(0.5) ? 1.0f : 0.0f;
}

} // namespace detail

// Pixel-space attack surface: overwrites the patch region with solid colors,
// seeded random content and salt-and-pepper noise; all other pixels stay
// bit-identical.
inline std::vector<Image> pixel_space_attack(const Image& image, const PatchSpec& patch,
                                             int count, std::uint64_t seed) {
    std::vector<Image> variants;
    if (count <= 0) return variants;
    patch.validate(image.width, image.height);

    Rng rng(derive_seed(seed, 0xF1DE));
    for (int k = 0; k < count; ++k) {
        Image v = image;
        for (const auto& rc : patch.rects)
            for (int y = rc.y; y < rc.y + rc.h; ++y)
                for (int x = rc.x; x < rc.x + rc.w; ++x)
                    for (int c = 0; c < image.channels; ++c)
                        v.at(x, y, c) = detail::pixel_variant_value(k, rng);
        variants.push_back(std::move(v));
    }
    return variants;
}

struct Violation {
    std::string image_id;
    int object_id = 0;
    int patch_x = 0, patch_y = 0;
    std::string strategy;
    std::string outcome;  // "undetected-unalerted"
};

struct AttackStats {
    long long locations = 0;
    long long variants = 0;
    long long checks = 0;  // (variant, behavior) outcomes examined
};

namespace detail {

struct Behavior {
    std::string name;
    std::vector<FeatureBox> explained_boxes;  // mapped once; variant-independent
    bool detects_victim = false;              // some surviving box overlaps the victim
};

// Detector behaviors the threat model grants: the victim's box is always
// suppressed; beyond that the adversary may drop any subset, so the oracle
// covers the two lattice extremes plus seeded random subsets. The base
// detector is treated as adversary-controlled, which subsumes any
// pixel-dependent reaction it could have to the patch content.
inline std::vector<Behavior> make_behaviors(const std::vector<Detection>& base_dets,
                                            const PixelBox& victim, double iou_tau,
                                            const ReceptiveFieldConfig& rf,
                                            const AttackOracleConfig& cfg, std::uint64_t stream) {
    std::vector<Detection> survivors;
    for (const auto& d : base_dets)
        if (iou(d.box, victim) < iou_tau) survivors.push_back(d);

    std::vector<Behavior> behaviors;
    auto push = [&](std::string name, const std::vector<Detection>& dets) {
        Behavior b;
        b.name = std::move(name);
        for (const auto& d : dets) {
            b.explained_boxes.push_back(map_box_to_feature_space(d.box, rf));
            if (iou(d.box, victim) > 0.0) b.detects_victim = true;
        }
        behaviors.push_back(std::move(b));
    };

    push("victim", survivors);
    push("all", {});
    Rng rng(derive_seed(cfg.seed, stream));
    for (int k = 0; k < cfg.random_behaviors; ++k) {
        std::vector<Detection> subset;
        for (const auto& d : survivors)
            if (!rng.bernoulli(cfg.extra_drop_rate)) subset.push_back(d);
        push("rand" + std::to_string(k), subset);
    }
    return behaviors;
}

// Explain with precomputed mapped boxes: gate on the variant's map, zero in
// the scratch copy, then look for an unexplained cluster.
inline bool explain_behavior(const Behavior& b, const ObjectnessMap& om, int min_points,
                             const std::vector<Cell>& disk, ObjectnessMap& scratch) {
    scratch = om;
    for (const auto& fb : b.explained_boxes) {
        if (fb.empty()) continue;
        long long total = 0;
        for (int i = fb.i_min; i < fb.i_max; ++i)
            for (int j = fb.j_min; j < fb.j_max; ++j) total += om.at(i, j);
        if (total > 0)
            for (int i = fb.i_min; i < fb.i_max; ++i)
                for (int j = fb.j_min; j < fb.j_max; ++j) scratch.at(i, j) = 0;
    }
    return has_cluster(scratch, min_points, disk);
}

} // namespace detail

// Exercises every degree of freedom the threat model grants against one
// certified object: each patch location of its certificate, the analytic
// worst case plus seeded feature- and pixel-space variants at that location,
// crossed with victim-suppressing detector behaviors. Appends a violation
// whenever the defense neither detects the object (no surviving box with
// IoU > 0) nor alerts. A passing run appends nothing.
inline void attack_certified_object(const AnnotatedImage& image, const LocalLogitsMap& logits,
                                    int object_id, const PixelBox& victim, int patch_w, int patch_h,
                                    const std::vector<PatchLocation>& locations,
                                    const std::vector<Detection>& base_dets,
                                    const LocalModel& model, const PredictorConfig& pcfg,
                                    const ClusterConfig& ccfg, double iou_tau,
                                    const AttackOracleConfig& cfg, std::vector<Violation>& out,
                                    AttackStats* stats = nullptr) {
    const int N = logits.num_object_classes();
    ObjectnessPipeline pipe(logits.X, logits.Y, N, pcfg);
    pipe.load(logits);
    const auto disk = detail::disk_offsets(ccfg.eps);

    const std::uint64_t obj_stream = hash_image_id(image.id) * 1315423911ull + object_id;
    auto behaviors = detail::make_behaviors(base_dets, victim, iou_tau, logits.cfg, cfg, obj_stream);
    // A behavior whose surviving boxes still cover the victim can never
    // yield a violation; outcomes there are detected=yes by construction.
    std::erase_if(behaviors, [](const detail::Behavior& b) { return b.detects_victim; });

    ObjectnessMap om, scratch;
    std::vector<double> saved;
    std::vector<double> descriptor(model.feature_dim());
    std::vector<double> head(model.head_classes());
    Image patched = image.image;
    std::vector<float> saved_pixels;

    auto check_behaviors = [&](const std::string& strategy, int loc_x, int loc_y) {
        for (const auto& b : behaviors) {
            if (stats) ++stats->checks;
            if (!detail::explain_behavior(b, om, ccfg.min_points, disk, scratch))
                out.push_back(Violation{image.id, object_id, loc_x, loc_y,
                                        strategy + "|" + b.name, "undetected-unalerted"});
        }
    };

    for (const auto& loc : locations) {
        if (stats) ++stats->locations;
        const auto cells = loc.footprint.cells();

        saved.resize(cells.size() * static_cast<std::size_t>(N));
        for (std::size_t k = 0; k < cells.size(); ++k)
            for (int c = 0; c < N; ++c) saved[k * N + c] = pipe.clipped(cells[k].i, cells[k].j)[c];
        auto restore = [&] {
            for (std::size_t k = 0; k < cells.size(); ++k)
                for (int c = 0; c < N; ++c) pipe.clipped(cells[k].i, cells[k].j)[c] = saved[k * N + c];
        };
        auto run_variant = [&](const std::string& strategy) {
            if (stats) ++stats->variants;
            pipe.rebuild_sat();
            pipe.compute_clean(om);
            check_behaviors(strategy, loc.x, loc.y);
        };

        // Analytic worst case: every corrupted logit at the clip floor.
        for (const auto& cell : cells)
            for (int c = 0; c < N; ++c) pipe.clipped(cell.i, cell.j)[c] = 0.0;
        run_variant("feat:worst");
        restore();

        // Per-class suppression.
        for (int kill = 0; kill < N; ++kill) {
            for (const auto& cell : cells) pipe.clipped(cell.i, cell.j)[kill] = 0.0;
            run_variant("feat:class" + std::to_string(kill));
            restore();
        }

        // Seeded random assignments over a wide range.
        Rng rng(derive_seed(cfg.seed, obj_stream ^ ((static_cast<std::uint64_t>(loc.x) << 20) | static_cast<std::uint64_t>(loc.y))));
        for (int k = 0; k < cfg.feature_random; ++k) {
            for (const auto& cell : cells) {
                double* p = pipe.clipped(cell.i, cell.j);
                for (int c = 0; c < N; ++c) {
                    const double logit = rng.uniform(-1000.0, 1000.0);
                    p[c] = logit > 0 ? logit : 0.0;
                }
            }
            run_variant("feat:rand" + std::to_string(k));
            restore();
        }

        // Pixel-space variants: overwrite the patch region and recompute the
        // logits of the footprint cells: the only cells whose receptive
        // field reads the patch (validated separately against a full
        // re-extraction).
        if (cfg.pixel_variants > 0 && !cells.empty()) {
            const int pw = std::min(patch_w, image.image.width - loc.x);
            const int ph = std::min(patch_h, image.image.height - loc.y);
            saved_pixels.resize(static_cast<std::size_t>(pw) * ph * image.image.channels);
            std::size_t sp = 0;
            for (int y = loc.y; y < loc.y + ph; ++y)
                for (int x = loc.x; x < loc.x + pw; ++x)
                    for (int c = 0; c < image.image.channels; ++c)
                        saved_pixels[sp++] = patched.at(x, y, c);

            for (int k = 0; k < cfg.pixel_variants; ++k) {
                Rng prng(derive_seed(cfg.seed ^ 0xD00D, obj_stream ^ ((static_cast<std::uint64_t>(loc.x) << 21) | static_cast<std::uint64_t>(loc.y) | (static_cast<std::uint64_t>(k) << 42))));
                for (int y = loc.y; y < loc.y + ph; ++y)
                    for (int x = loc.x; x < loc.x + pw; ++x)
                        for (int c = 0; c < image.image.channels; ++c)
                            patched.at(x, y, c) = detail::pixel_variant_value(k, prng);

                for (const auto& cell : cells) {
                    extract_cell_logits(patched, model, cell.i, cell.j, head.data(), descriptor.data());
                    double* p = pipe.clipped(cell.i, cell.j);
                    for (int c = 0; c < N; ++c) p[c] = head[c] > 0 ? head[c] : 0.0;
                }
                run_variant("pix:" + std::to_string(k));
                restore();
            }

            sp = 0;
            for (int y = loc.y; y < loc.y + ph; ++y)
                for (int x = loc.x; x < loc.x + pw; ++x)
                    for (int c = 0; c < image.image.channels; ++c)
                        patched.at(x, y, c) = saved_pixels[sp++];
        }
    }
}

} // namespace dguard
