#include <catch2/catch.hpp>

#include "dguard/rng.hpp"
#include "dguard/synthdata.hpp"
#include "dguard/train.hpp"

using namespace dguard;

namespace {

SceneSpec small_scene(int classes, int count, std::uint64_t seed) {
    SceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.classes = classes;
    spec.count = count;
    spec.objects_min = 1;
    spec.objects_max = 2;
    spec.size_frac_min = 0.30;
    spec.size_frac_max = 0.55;
    spec.large_fraction = 0.0;
    spec.patch_reference = 16;
    spec.seed = seed;
    return spec;
}

const Dataset& shared_dataset() {
    static const Dataset ds = generate_dataset(small_scene(2, 16, 1234));
    return ds;
}

} // namespace

TEST_CASE("training separable classes reaches full box accuracy") {
    TrainConfig cfg{0.5, 120, 7};
    TrainStats stats;
    const LocalModel model = train_local_model(shared_dataset(), 9, 4, 2, cfg, &stats);
    CHECK(stats.skipped_boxes == 0);
    CHECK(box_classification_accuracy(model, shared_dataset()) == 1.0);
}

TEST_CASE("training loss never increases") {
    TrainConfig cfg{0.5, 60, 7};
    TrainStats stats;
    train_local_model(shared_dataset(), 9, 4, 2, cfg, &stats);
    REQUIRE(stats.epoch_loss.size() == 60);
    for (std::size_t k = 1; k < stats.epoch_loss.size(); ++k)
        CHECK(stats.epoch_loss[k] <= stats.epoch_loss[k - 1] + 1e-9);
    CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
}

TEST_CASE("zero epochs returns the seeded initialization unchanged") {
    TrainConfig cfg{0.5, 0, 99};
    const LocalModel model = train_local_model(shared_dataset(), 9, 4, 2, cfg);

    LocalModel expected = make_local_model(9, 4, 2, 3);
    Rng rng(cfg.seed);
    for (auto& w : expected.weights) w = rng.uniform(-0.01, 0.01);
    for (auto& b : expected.bias) b = 0.1;
    CHECK(model.weights == expected.weights);
    CHECK(model.bias == expected.bias);
}

TEST_CASE("training is bit-deterministic given the seed") {
    TrainConfig cfg{0.5, 40, 7};
    const LocalModel a = train_local_model(shared_dataset(), 9, 4, 2, cfg);
    const LocalModel b = train_local_model(shared_dataset(), 9, 4, 2, cfg);
    CHECK(encode_model(a) == encode_model(b));

    TrainConfig other = cfg;
    other.seed = 8;
    const LocalModel c = train_local_model(shared_dataset(), 9, 4, 2, other);
    CHECK(encode_model(a) != encode_model(c));
}

TEST_CASE("the default three-class scene generalizes to a held-out split") {
    SceneSpec spec;  // default scene, 200 images
    const Dataset full = generate_dataset(spec);
    REQUIRE(full.images.size() == 200);

    Dataset train_split, held_out;
    train_split.images.assign(full.images.begin(), full.images.begin() + 160);
    held_out.images.assign(full.images.begin() + 160, full.images.end());

    const LocalModel model = train_local_model(train_split, 9, 4, spec.classes, TrainConfig{});
    CHECK(box_classification_accuracy(model, held_out) >= 0.95);
}

TEST_CASE("training validates its inputs") {
    CHECK_THROWS_AS(train_local_model(Dataset{}, 9, 4, 2, TrainConfig{}), std::invalid_argument);

    Dataset bad = shared_dataset();
    bad.images[0].objects[0].label = 7;  // out of range for 2 classes
    CHECK_THROWS_AS(train_local_model(bad, 9, 4, 2, TrainConfig{}), std::invalid_argument);
}
