#include <catch2/catch.hpp>

#include <array>
#include <set>

#include "dguard/certify.hpp"
#include "dguard/rng.hpp"
#include "dguard/synthdata.hpp"
#include "dguard/train.hpp"
#include "reference_impls.hpp"

using namespace dguard;

namespace {

LocalLogitsMap random_map(Rng& rng, int X, int Y, int classes, double lo = -4.0, double hi = 4.0) {
    LocalLogitsMap map(X, Y, classes);
    for (auto& v : map.values) v = rng.uniform(lo, hi);
    return map;
}

// Straight-line transcription of the per-location analysis: worst-case map
// by the naive route, crop, quadratic cluster search.
bool ref_dg_pa_one(const LocalLogitsMap& map, const Footprint& fp, const FeatureBox& object_fbox,
                   const PredictorConfig& pcfg, const ClusterConfig& ccfg) {
    const ObjectnessMap om = refimpl::worst_case_reference(map, fp, pcfg);
    return refimpl::dbscan_reference(om.crop(object_fbox), ccfg).has_value();
}

std::vector<std::array<int, 4>> footprint_key(const Footprint& fp) {
    std::vector<std::array<int, 4>> key;
    for (const auto& b : fp.boxes()) key.push_back({b.i_min, b.j_min, b.i_max, b.j_max});
    return key;
}

struct TrainedSuite {
    Dataset dataset;
    LocalModel model;
    PredictorConfig pcfg{6, 6, 22.0};
    ClusterConfig ccfg{3.0, 20};
    EvalConfig ecfg{};
    int close_distance = 4;
};

const TrainedSuite& trained_suite() {
    static const TrainedSuite suite = [] {
        SceneSpec spec;  // default scene shape at reduced count
        spec.classes = 2;
        spec.count = 10;
        spec.seed = 2121;
        TrainedSuite s;
        s.dataset = generate_dataset(spec);
        s.model = train_local_model(s.dataset, 9, 4, 2, TrainConfig{0.5, 120, 7});
        return s;
    }();
    return suite;
}

} // namespace

TEST_CASE("threat-model categorization follows the worked examples") {
    const auto rf = make_rf(33, 8, 416, 416);
    const PixelBox object{100, 100, 200, 200};  // 100x100 object

    SECTION("a 32x32 patch fully inside the object is over") {
        const auto over = enumerate_patch_locations(32, 32, rf, object, {PatchCategory::Over, 8});
        REQUIRE_FALSE(over.empty());
        for (const auto& loc : over)
            CHECK(object.contains(PixelBox{loc.x, loc.y, loc.x + 32, loc.y + 32}));
        // The placement (120,130) is contained in the object; its footprint
        // must appear in the deduplicated over list.
        const Footprint probe = corrupted_footprint(PatchSpec{{PatchRect{120, 130, 32, 32}}}, rf);
        bool found = false;
        for (const auto& loc : over)
            if (loc.footprint == probe) found = true;
        CHECK(found);
    }
    SECTION("a footprint touching the object feature box at gap 0 is close") {
        const FeatureBox object_fbox = map_box_to_feature_space(object, rf);
        const auto close = enumerate_patch_locations(32, 32, rf, object, {PatchCategory::Close, 8});
        bool touching_found = false;
        for (const auto& loc : close) {
            const PixelBox as_box{loc.x, loc.y, loc.x + 32, loc.y + 32};
            CHECK_FALSE(object.contains(as_box));
            const int gap = chebyshev_gap(loc.footprint.hull(), object_fbox);
            CHECK(gap < 8);
            if (gap == 0) touching_found = true;
        }
        CHECK(touching_found);
    }
    SECTION("far locations keep at least the close_distance gap") {
        const FeatureBox object_fbox = map_box_to_feature_space(object, rf);
        const auto far = enumerate_patch_locations(32, 32, rf, object, {PatchCategory::Far, 8});
        for (const auto& loc : far)
            if (!loc.footprint.empty())
                CHECK(chebyshev_gap(loc.footprint.hull(), object_fbox) >= 8);
        CHECK(far.size() > 100);
    }
}

TEST_CASE("footprint deduplication reproduces the exhaustive location count") {
    // Full-scale configuration: 416x416 image, 32x32 patch, r=33, s=8.
    // 385^2 = 148225 pixel placements collapse to the distinct-footprint
    // count. The full 8x8 footprints form a 41x41 block (~1.6k, the
    // feature-space location count quoted at this scale); exact
    // deduplication additionally keeps the border-clamped footprints,
    // giving 49 distinct spans per axis.
    const auto rf = make_rf(33, 8, 416, 416);
    const PixelBox object{100, 100, 200, 200};

    std::set<std::vector<std::array<int, 4>>> brute;
    std::set<std::vector<std::array<int, 4>>> interior;
    for (int x = 0; x + 32 <= 416; ++x)
        for (int y = 0; y + 32 <= 416; ++y) {
            const Footprint fp = corrupted_footprint(PatchSpec{{PatchRect{x, y, 32, 32}}}, rf);
            brute.insert(footprint_key(fp));
            if (!fp.empty() && fp.hull().width() == 8 && fp.hull().height() == 8)
                interior.insert(footprint_key(fp));
        }
    CHECK(brute.size() == 49u * 49u);
    CHECK(interior.size() == 41u * 41u);  // the quoted ~1.6k

    // The three categories partition all placements, so their deduplicated
    // footprints must union to the brute-force set.
    std::set<std::vector<std::array<int, 4>>> from_enumeration;
    std::size_t total_locations = 0;
    for (PatchCategory cat : {PatchCategory::Far, PatchCategory::Close, PatchCategory::Over}) {
        const auto locs = enumerate_patch_locations(32, 32, rf, object, {cat, 8});
        total_locations += locs.size();
        for (const auto& loc : locs) from_enumeration.insert(footprint_key(loc.footprint));
    }
    CHECK(from_enumeration == brute);
    // Footprints shared between categories are rare; the union stays near
    // the per-category sum.
    CHECK(total_locations >= brute.size());
    CHECK(total_locations <= brute.size() + 200);
}

TEST_CASE("patch that does not fit is rejected") {
    const auto rf = make_rf(9, 4, 64, 64);
    CHECK_THROWS_AS(enumerate_patch_locations(65, 10, rf, PixelBox{0, 0, 10, 10}, {PatchCategory::Far, 8}),
                    std::invalid_argument);
    CHECK_THROWS_AS(enumerate_patch_locations(0, 10, rf, PixelBox{0, 0, 10, 10}, {PatchCategory::Far, 8}),
                    std::invalid_argument);
}

TEST_CASE("dg_pa_one worked cases") {
    // Object occupies a block of cells with strong class-0 logits; the rest
    // of the map is silent.
    const int X = 22, Y = 22;
    LocalLogitsMap map(X, Y, 3);
    map.cfg = make_rf(9, 4, 96, 96);
    const FeatureBox object_fbox{3, 3, 12, 12};
    for (int i = object_fbox.i_min; i < object_fbox.i_max; ++i)
        for (int j = object_fbox.j_min; j < object_fbox.j_max; ++j) map.at(i, j, 0) = 3.0;
    const PredictorConfig pcfg{4, 4, 1.0};
    const ClusterConfig ccfg{2.0, 9};
    REQUIRE(dg_pa_one(map, Footprint{}, object_fbox, pcfg, ccfg));

    SECTION("footprint far from every window overlapping the object: certified") {
        const Footprint far(std::vector<FeatureBox>{{18, 18, 20, 20}});
        CHECK(dg_pa_one(map, far, object_fbox, pcfg, ccfg));
    }
    SECTION("footprint covering the whole grid: not certified") {
        const Footprint all(std::vector<FeatureBox>{{0, 0, X, Y}});
        CHECK_FALSE(dg_pa_one(map, all, object_fbox, pcfg, ccfg));
    }
    SECTION("empty object feature box is a caller error") {
        CHECK_THROWS_AS(dg_pa_one(map, Footprint{}, FeatureBox{}, pcfg, ccfg), std::invalid_argument);
    }
}

TEST_CASE("dg_pa_one equals the straight-line oracle on random instances") {
    Rng rng(6023);
    int robust = 0;
    for (int t = 0; t < 150; ++t) {
        const int X = rng.uniform_int(8, 20), Y = rng.uniform_int(8, 20);
        const LocalLogitsMap map = random_map(rng, X, Y, rng.uniform_int(2, 4), -2.0, 5.0);
        const PredictorConfig pcfg{rng.uniform_int(2, 5), rng.uniform_int(2, 5), rng.uniform(1.0, 6.0)};
        const ClusterConfig ccfg{rng.uniform(1.0, 2.5), rng.uniform_int(3, 9)};

        const int ow = rng.uniform_int(3, X - 2), oh = rng.uniform_int(3, Y - 2);
        const int oi = rng.uniform_int(0, X - ow), oj = rng.uniform_int(0, Y - oh);
        const FeatureBox object_fbox{oi, oj, oi + ow, oj + oh};

        const int fw = rng.uniform_int(1, X / 2), fh = rng.uniform_int(1, Y / 2);
        const int fi = rng.uniform_int(0, X - fw), fj = rng.uniform_int(0, Y - fh);
        const Footprint fp(std::vector<FeatureBox>{{fi, fj, fi + fw, fj + fh}});

        const bool mine = dg_pa_one(map, fp, object_fbox, pcfg, ccfg);
        CHECK(mine == ref_dg_pa_one(map, fp, object_fbox, pcfg, ccfg));
        robust += mine;
    }
    CHECK(robust > 10);
    CHECK(robust < 140);
}

TEST_CASE("certification is monotone under footprint nesting") {
    Rng rng(6024);
    for (int t = 0; t < 200; ++t) {
        const int X = 18, Y = 18;
        const LocalLogitsMap map = random_map(rng, X, Y, 3, -1.0, 4.0);
        const PredictorConfig pcfg{4, 4, rng.uniform(1.0, 4.0)};
        const ClusterConfig ccfg{2.0, rng.uniform_int(4, 8)};
        const FeatureBox object_fbox{2, 2, 14, 14};

        const int w = rng.uniform_int(2, 8), h = rng.uniform_int(2, 8);
        const int i0 = rng.uniform_int(0, X - w), j0 = rng.uniform_int(0, Y - h);
        const Footprint big(std::vector<FeatureBox>{{i0, j0, i0 + w, j0 + h}});
        const Footprint small(std::vector<FeatureBox>{
            {i0, j0, i0 + rng.uniform_int(1, w), j0 + rng.uniform_int(1, h)}});

        if (dg_pa_one(map, big, object_fbox, pcfg, ccfg))
            CHECK(dg_pa_one(map, small, object_fbox, pcfg, ccfg));
    }
}

TEST_CASE("two-rectangle specs equal their footprint union") {
    Rng rng(6025);
    const auto rf = make_rf(9, 4, 96, 96);
    for (int t = 0; t < 150; ++t) {
        LocalLogitsMap map = random_map(rng, rf.cells_x(), rf.cells_y(), 3, -2.0, 4.0);
        map.cfg = rf;
        const PredictorConfig pcfg{4, 4, rng.uniform(1.0, 3.0)};
        const ClusterConfig ccfg{2.0, 6};
        const FeatureBox object_fbox{2, 2, 16, 16};

        PatchSpec spec;
        for (int k = 0; k < 2; ++k) {
            const int w = rng.uniform_int(4, 24), h = rng.uniform_int(4, 24);
            spec.rects.push_back(PatchRect{rng.uniform_int(0, 96 - w), rng.uniform_int(0, 96 - h), w, h});
        }

        // Union built independently: per-rectangle footprints merged cell by cell.
        std::vector<FeatureBox> cell_boxes;
        for (const auto& rc : spec.rects) {
            const Footprint single = corrupted_footprint(PatchSpec{{rc}}, rf);
            for (const auto& cell : single.cells())
                cell_boxes.push_back(FeatureBox{cell.i, cell.j, cell.i + 1, cell.j + 1});
        }
        const Footprint union_fp(std::move(cell_boxes));
        CHECK(union_fp == corrupted_footprint(spec, rf));
        CHECK(dg_pa_one(map, spec, object_fbox, pcfg, ccfg) ==
              dg_pa_one(map, union_fp, object_fbox, pcfg, ccfg));
    }
}

TEST_CASE("dg_pa requires correct clean detection and sweeps all locations") {
    const TrainedSuite& s = trained_suite();
    const AnnotatedImage& ai = s.dataset.images[0];
    REQUIRE_FALSE(ai.objects.empty());
    const PerfectCleanDetector base(s.dataset);
    const auto rf = make_rf(9, 4, ai.image.width, ai.image.height);

    SECTION("empty location list certifies vacuously when clean detection holds") {
        const LocalModel zero = make_local_model(9, 4, 2, 3);
        const Certificate cert = dg_pa(ai.image, ai.id, ai.objects, 0, {}, zero, base,
                                       s.pcfg, s.ccfg, 0.5);
        CHECK(cert.clean_ok);
        CHECK(cert.certified);
        CHECK(cert.n_locations == 0);
    }
    SECTION("an object the base detector misses is never certified") {
        // External detector with an empty file: no detections at all.
        namespace fs = std::filesystem;
        const auto dir = fs::temp_directory_path() / "dguard_certify_test";
        fs::create_directories(dir);
        const std::string path = (dir / "empty.txt").string();
        std::ofstream(path).close();
        const ExternalDetector missing(path);

        const LocalModel zero = make_local_model(9, 4, 2, 3);  // no alert possible
        const Certificate cert = dg_pa(ai.image, ai.id, ai.objects, 0, {}, zero, missing,
                                       s.pcfg, s.ccfg, 0.5);
        CHECK_FALSE(cert.clean_ok);
        CHECK_FALSE(cert.certified);
    }
    SECTION("certificate verdict equals the per-location oracle conjunction") {
        const auto locations = enumerate_patch_locations(16, 16, rf, ai.objects[0].box,
                                                         {PatchCategory::Far, 4});
        REQUIRE(locations.size() > 50);
        const Certificate cert = dg_pa(ai.image, ai.id, ai.objects, 0, locations, s.model, base,
                                       s.pcfg, s.ccfg, 0.5);
        if (cert.clean_ok) {
            const LocalLogitsMap logits = extract_local_logits(ai.image, s.model);
            const FeatureBox fbox = map_box_to_feature_space(ai.objects[0].box, rf);
            bool all_robust = true;
            for (const auto& loc : locations)
                all_robust = all_robust && ref_dg_pa_one(logits, loc.footprint, fbox, s.pcfg, s.ccfg);
            CHECK(cert.certified == all_robust);
            if (!cert.certified) CHECK(cert.has_failing);
        }
    }
    SECTION("growing the location set never certifies more") {
        const auto all_locs = enumerate_patch_locations(16, 16, rf, ai.objects[0].box,
                                                        {PatchCategory::Close, 4});
        REQUIRE(all_locs.size() > 4);
        const std::vector<PatchLocation> half(all_locs.begin(),
                                              all_locs.begin() + all_locs.size() / 2);
        const Certificate full = dg_pa(ai.image, ai.id, ai.objects, 0, all_locs, s.model, base,
                                       s.pcfg, s.ccfg, 0.5);
        const Certificate part = dg_pa(ai.image, ai.id, ai.objects, 0, half, s.model, base,
                                       s.pcfg, s.ccfg, 0.5);
        if (full.certified) CHECK(part.certified);
    }
}

TEST_CASE("certified recall: zero-logit model certifies nothing") {
    const TrainedSuite& s = trained_suite();
    const PerfectCleanDetector base(s.dataset);
    const LocalModel zero = make_local_model(9, 4, 2, 3);

    // Patch chosen smaller than every object so no category has an empty
    // location list (an empty list would certify vacuously).
    CertifyOptions opt;
    opt.patch_w = opt.patch_h = 8;
    opt.close_distance = 4;
    opt.jobs = 1;
    const CertifyResult res = certify_dataset(s.dataset, zero, base, s.pcfg, s.ccfg, s.ecfg, opt);
    for (const auto& [cat, stat] : res.by_category) {
        CHECK(stat.objects == s.dataset.total_objects());
        CHECK(stat.certified == 0);
        CHECK(res.certified_recall(cat) == 0.0);
    }
    for (const auto& row : res.rows) CHECK(row.n_locations > 0);
}

TEST_CASE("certified recall counts certified objects over all objects") {
    CHECK(CategoryStat{2, 1}.cr() == 0.5);
    CHECK(CategoryStat{0, 0}.cr() == 0.0);

    const TrainedSuite& s = trained_suite();
    const PerfectCleanDetector base(s.dataset);
    CertifyOptions opt;
    opt.patch_w = opt.patch_h = 16;
    opt.close_distance = 4;
    opt.jobs = 1;
    const CertifyResult res = certify_dataset(s.dataset, s.model, base, s.pcfg, s.ccfg, s.ecfg, opt);

    std::map<PatchCategory, std::pair<long, long>> recount;
    for (const auto& row : res.rows) {
        auto& [objects, certified] = recount[row.category];
        ++objects;
        certified += row.certified ? 1 : 0;
    }
    for (const auto& [cat, counts] : recount) {
        CHECK(res.by_category.at(cat).objects == counts.first);
        CHECK(res.by_category.at(cat).certified == counts.second);
        CHECK(res.certified_recall(cat) ==
              Approx(static_cast<double>(counts.second) / counts.first));
    }
    // The trained suite certifies at least something in the far category.
    CHECK(res.certified_recall(PatchCategory::Far) > 0.0);
}

TEST_CASE("parallel certification matches single-threaded output") {
    const TrainedSuite& s = trained_suite();
    const PerfectCleanDetector base(s.dataset);
    CertifyOptions opt;
    opt.patch_w = opt.patch_h = 16;
    opt.close_distance = 4;
    opt.jobs = 1;
    const CertifyResult seq = certify_dataset(s.dataset, s.model, base, s.pcfg, s.ccfg, s.ecfg, opt);
    opt.jobs = 8;
    const CertifyResult par = certify_dataset(s.dataset, s.model, base, s.pcfg, s.ccfg, s.ecfg, opt);
    REQUIRE(seq.rows.size() == par.rows.size());
    for (std::size_t k = 0; k < seq.rows.size(); ++k) {
        CHECK(seq.rows[k].image_id == par.rows[k].image_id);
        CHECK(seq.rows[k].certified == par.rows[k].certified);
        CHECK(seq.rows[k].n_locations == par.rows[k].n_locations);
        CHECK(seq.rows[k].failing_x == par.rows[k].failing_x);
    }
}
