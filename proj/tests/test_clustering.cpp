#include <catch2/catch.hpp>

#include "dguard/clustering.hpp"
#include "dguard/rng.hpp"
#include "reference_impls.hpp"

using namespace dguard;

TEST_CASE("empty map yields no clusters") {
    const ObjectnessMap om(20, 20);
    CHECK_FALSE(det_cluster(om, ClusterConfig{3.0, 24}).has_value());
    CHECK_FALSE(has_cluster(om, ClusterConfig{3.0, 24}));
    CHECK_FALSE(det_cluster(ObjectnessMap{}, ClusterConfig{3.0, 1}).has_value());
}

TEST_CASE("a single cell clusters when min_points is 1") {
    ObjectnessMap om(10, 10);
    om.at(4, 7) = 1;
    const auto clusters = det_cluster(om, ClusterConfig{3.0, 1});
    REQUIRE(clusters.has_value());
    REQUIRE(clusters->size() == 1);
    REQUIRE((*clusters)[0].size() == 1);
    CHECK((*clusters)[0][0] == Cell{4, 7});
    // But not when two neighbors are required.
    CHECK_FALSE(det_cluster(om, ClusterConfig{3.0, 2}).has_value());
}

TEST_CASE("full-scale packing: 30 cells in a 6x5 block cluster, spread cells do not") {
    ObjectnessMap packed(48, 48);
    for (int i = 10; i < 16; ++i)
        for (int j = 10; j < 15; ++j) packed.at(i, j) = 1;
    const ClusterConfig cfg{3.0, 24};
    const auto clusters = det_cluster(packed, cfg);
    REQUIRE(clusters.has_value());
    CHECK(clusters->size() == 1);
    CHECK(refimpl::partition_key(*clusters) == refimpl::partition_key(*refimpl::dbscan_reference(packed, cfg)));

    // The same 30 cells spread at least 7 apart never reach 24 neighbors.
    ObjectnessMap spread(48, 48);
    int placed = 0;
    for (int i = 0; i < 48 && placed < 30; i += 7)
        for (int j = 0; j < 48 && placed < 30; j += 7) {
            spread.at(i, j) = 1;
            ++placed;
        }
    REQUIRE(placed == 30);
    CHECK_FALSE(det_cluster(spread, cfg).has_value());
}

TEST_CASE("min_points counts the query cell itself") {
    ObjectnessMap om(8, 8);
    om.at(2, 2) = 1;
    om.at(2, 3) = 1;
    // Two cells within eps of each other: neighborhoods have size 2.
    CHECK(det_cluster(om, ClusterConfig{1.0, 2}).has_value());
    CHECK_FALSE(det_cluster(om, ClusterConfig{1.0, 3}).has_value());
}

TEST_CASE("grid DBSCAN agrees exactly with the quadratic reference") {
    Rng rng(314159);
    int clustered = 0;
    for (int t = 0; t < 500; ++t) {
        const int X = rng.uniform_int(4, 28);
        const int Y = rng.uniform_int(4, 28);
        ObjectnessMap om(X, Y);
        const double density = rng.uniform(0.05, 0.6);
        for (auto& c : om.cells) c = rng.bernoulli(density) ? 1 : 0;
        const ClusterConfig cfg{rng.uniform(1.0, 4.0), rng.uniform_int(2, 16)};

        const auto mine = det_cluster(om, cfg);
        const auto ref = refimpl::dbscan_reference(om, cfg);
        REQUIRE(mine.has_value() == ref.has_value());
        CHECK(has_cluster(om, cfg) == mine.has_value());
        if (mine) {
            ++clustered;
            CHECK(refimpl::partition_key(*mine) == refimpl::partition_key(*ref));
        }
    }
    // The sample must exercise both outcomes to mean anything.
    CHECK(clustered > 50);
    CHECK(clustered < 450);
}

TEST_CASE("cluster config validation") {
    const ClusterConfig zero_eps{0.0, 5};
    const ClusterConfig zero_points{2.0, 0};
    CHECK_THROWS_AS(zero_eps.validate(), std::invalid_argument);
    CHECK_THROWS_AS(zero_points.validate(), std::invalid_argument);
}
