// Forest fitting, the averaged and pooled estimates, the empirical connection
// function, and the forest/pooled proximity bound.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "kerf/forest.hpp"
#include "kerf/models.hpp"

using kerf::Dataset;
using kerf::Forest;
using kerf::RandomSource;
using kerf::TreeKind;
using kerf::TreeParams;

namespace {

TreeParams fixed_params(TreeKind kind, int level) {
    TreeParams p;
    p.kind = kind;
    p.level = level;
    return p;
}

}  // namespace

TEST_CASE("a single-tree forest is that tree", "[forest]") {
    RandomSource rng(1);
    const Dataset data = kerf::generate(kerf::synthetic_model(1, 30, 3), rng.split(0));
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::uniform, 3), data, 1,
                                      false, rng.split(1));
    REQUIRE(f.tree_count() == 1);
    RandomSource qr = rng.split(2);
    for (int q = 0; q < 50; ++q) {
        std::vector<double> x(3);
        for (auto& v : x) v = qr.next_double();
        REQUIRE(kerf::forest_predict(f, x) == f.trees[0].predict(x));
    }
}

TEST_CASE("the pooled estimate follows occupancy, not tree means", "[forest]") {
    // Two points, one level-1 centred split: x = 0.3 shares the left cell
    // with the sample at 0.1 (response 0) in every tree.
    const Dataset data({0.1, 0.9}, {0.0, 1.0}, 1);
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 1), data, 8,
                                      false, RandomSource(2));
    const std::vector<double> x{0.3};
    REQUIRE(kerf::kerf_predict(f, x) == 0.0);
    REQUIRE(kerf::forest_predict(f, x) == 0.0);
}

TEST_CASE("queries outside every occupied cell yield zero", "[forest]") {
    const Dataset data({0.1, 0.2}, {3.0, 5.0}, 1);
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 2), data, 5,
                                      false, RandomSource(3));
    const std::vector<double> x{0.9};   // cell ]0.75, 1] holds no sample
    REQUIRE(kerf::kerf_predict(f, x) == 0.0);
    REQUIRE(kerf::forest_predict(f, x) == 0.0);
}

TEST_CASE("the pooled estimate stays inside the connected response range",
          "[forest]") {
    RandomSource rng(4);
    const Dataset data = kerf::generate(kerf::synthetic_model(3, 80, 4), rng.split(0));
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::median, 3), data, 20,
                                      false, rng.split(1));
    RandomSource qr = rng.split(2);
    for (int q = 0; q < 200; ++q) {
        std::vector<double> x(4);
        for (auto& v : x) v = qr.next_double();
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& t : f.trees) {
            const int leaf = t.locate(x);
            for (std::size_t i = 0; i < data.size(); ++i)
                if (t.locate(data.point(i)) == leaf) {
                    lo = std::min(lo, data.response(i));
                    hi = std::max(hi, data.response(i));
                }
        }
        const double v = kerf::kerf_predict(f, x);
        if (lo <= hi) {
            REQUIRE(v >= lo - 1e-12);
            REQUIRE(v <= hi + 1e-12);
        } else {
            REQUIRE(v == 0.0);
        }
    }
}

TEST_CASE("the empirical connection is reflexive and symmetric", "[forest]") {
    RandomSource rng(5);
    const Dataset data = kerf::generate(kerf::synthetic_model(2, 40, 10), rng.split(0));
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::uniform, 4), data, 30,
                                      false, rng.split(1));
    RandomSource qr = rng.split(2);
    for (int q = 0; q < 50; ++q) {
        std::vector<double> x(10), z(10);
        for (auto& v : x) v = qr.next_double();
        for (auto& v : z) v = qr.next_double();
        REQUIRE(kerf::empirical_connection(f, x, x) == 1.0);
        REQUIRE(kerf::empirical_connection(f, x, z) ==
                kerf::empirical_connection(f, z, x));
    }
}

TEST_CASE("the level-1 centred connection splits evenly in two dimensions",
          "[forest]") {
    // One cut on one of two axes: the points (1/4,1/4) and (3/4,1/4) stay
    // together exactly when the cut uses the second axis, so half the time.
    const Dataset data({0.5, 0.5}, {1.0}, 2);
    const std::size_t M = 10000;
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 1), data, M,
                                      false, RandomSource(6));
    const std::vector<double> x{0.25, 0.25};
    const std::vector<double> z{0.75, 0.25};
    const double p = kerf::empirical_connection(f, x, z);
    REQUIRE(p > 0.5 - 3.0 / std::sqrt(static_cast<double>(M)) - 1e-9);
    REQUIRE(p < 0.5 + 3.0 / std::sqrt(static_cast<double>(M)) + 1e-9);
}

TEST_CASE("the kernel form reproduces the pooled estimate", "[forest]") {
    RandomSource rng(7);
    const Dataset data = kerf::generate(kerf::synthetic_model(1, 60, 5), rng.split(0));
    for (const bool bootstrap : {false, true}) {
        const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 4), data,
                                          25, bootstrap, rng.split(bootstrap ? 1 : 2));
        RandomSource qr = rng.split(3);
        for (int q = 0; q < 100; ++q) {
            std::vector<double> x(5);
            for (auto& v : x) v = qr.next_double();
            const double direct = kerf::kerf_predict(f, x);
            const double via = kerf::kerf_predict_via_kernel(f, x);
            REQUIRE_THAT(via, Catch::Matchers::WithinAbs(direct, 1e-12));
        }
    }
}

TEST_CASE("fitting is reproducible and bootstrap changes the bags", "[forest]") {
    RandomSource rng(8);
    const Dataset data = kerf::generate(kerf::synthetic_model(3, 50, 4), rng.split(0));
    const Forest a = kerf::fit_forest(fixed_params(TreeKind::breiman, 0), data, 10,
                                      true, RandomSource(77));
    const Forest b = kerf::fit_forest(fixed_params(TreeKind::breiman, 0), data, 10,
                                      true, RandomSource(77));
    REQUIRE(a.tree_count() == b.tree_count());
    for (std::size_t j = 0; j < a.tree_count(); ++j) {
        REQUIRE(a.trees[j].bag == b.trees[j].bag);
        REQUIRE(a.trees[j].nodes.size() == b.trees[j].nodes.size());
    }

    const Forest c = kerf::fit_forest(fixed_params(TreeKind::breiman, 0), data, 10,
                                      true, RandomSource(78));
    bool any_bag_differs = false;
    for (std::size_t j = 0; j < a.tree_count(); ++j)
        any_bag_differs = any_bag_differs || a.trees[j].bag != c.trees[j].bag;
    REQUIRE(any_bag_differs);

    // Bags are drawn per tree, not shared.
    REQUIRE(a.trees[0].bag != a.trees[1].bag);
}

TEST_CASE("a forest prefix equals the smaller forest with the same base",
          "[forest]") {
    RandomSource rng(9);
    const Dataset data = kerf::generate(kerf::synthetic_model(1, 30, 2), rng.split(0));
    const Forest small = kerf::fit_forest(fixed_params(TreeKind::uniform, 3), data, 3,
                                          true, RandomSource(5, 2));
    const Forest big = kerf::fit_forest(fixed_params(TreeKind::uniform, 3), data, 8,
                                        true, RandomSource(5, 2));
    for (std::size_t j = 0; j < small.tree_count(); ++j) {
        REQUIRE(small.trees[j].bag == big.trees[j].bag);
        REQUIRE(small.trees[j].nodes.size() == big.trees[j].nodes.size());
        for (std::size_t i = 0; i < small.trees[j].nodes.size(); ++i) {
            REQUIRE(small.trees[j].nodes[i].split_dim ==
                    big.trees[j].nodes[i].split_dim);
            REQUIRE(small.trees[j].nodes[i].split_pos ==
                    big.trees[j].nodes[i].split_pos);
        }
    }
}

TEST_CASE("fully grown greedy forests make both estimates coincide", "[forest]") {
    RandomSource rng(10);
    const Dataset data = kerf::generate(kerf::synthetic_model(1, 80, 6), rng.split(0));
    TreeParams params;
    params.kind = TreeKind::breiman;
    params.breiman.min_samples_split = 2;
    const Forest f = kerf::fit_forest(params, data, 20, false, rng.split(1));
    RandomSource qr = rng.split(2);
    for (int q = 0; q < 100; ++q) {
        std::vector<double> x(6);
        for (auto& v : x) v = qr.next_double();
        const kerf::ProximityReport r = kerf::proximity_report(f, x);
        REQUIRE(r.min_count == 1);
        REQUIRE(r.max_count == 1);
        REQUIRE(r.bound == 0.0);
        REQUIRE_THAT(kerf::forest_predict(f, x),
                     Catch::Matchers::WithinAbs(kerf::kerf_predict(f, x), 1e-12));
        REQUIRE(r.satisfied);
    }
}

TEST_CASE("the occupancy bound caps the estimate ratio", "[forest]") {
    RandomSource rng(11);
    // Noiseless first model keeps responses nonnegative, as the bound needs.
    const Dataset data = kerf::generate(kerf::synthetic_model(1, 90, 4), rng.split(0));
    TreeParams params;
    params.kind = TreeKind::breiman;
    params.breiman.min_samples_split = 6;   // leaves hold 1..5 samples
    const Forest f = kerf::fit_forest(params, data, 25, false, rng.split(1));
    RandomSource qr = rng.split(2);
    for (int q = 0; q < 100; ++q) {
        std::vector<double> x(4);
        for (auto& v : x) v = qr.next_double();
        const kerf::ProximityReport r = kerf::proximity_report(f, x);
        REQUIRE(r.bound_defined);
        REQUIRE(r.responses_nonnegative);
        REQUIRE(r.min_count >= 1);
        REQUIRE(r.max_count <= 5);
        REQUIRE(r.bound <= 4.0);
        REQUIRE(r.observed_gap <= r.bound + 1e-12);
        REQUIRE(r.satisfied);
    }
}

TEST_CASE("batched prediction matches the scalar calls under any thread cap",
          "[forest]") {
    RandomSource rng(12);
    const Dataset data = kerf::generate(kerf::synthetic_model(2, 50, 10), rng.split(0));
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 4), data, 10,
                                      false, rng.split(1));
    std::vector<double> rows(30 * 10);
    RandomSource qr = rng.split(2);
    for (auto& v : rows) v = qr.next_double();

    const auto serial_env = [&](const char* v) { setenv("KERF_THREADS", v, 1); };
    serial_env("1");
    const auto serial = kerf::predict_rows(f, rows, 30, kerf::PredictMode::kerf);
    serial_env("3");
    const auto parallel = kerf::predict_rows(f, rows, 30, kerf::PredictMode::kerf);
    unsetenv("KERF_THREADS");
    REQUIRE(serial == parallel);

    for (std::size_t i = 0; i < 30; ++i) {
        const std::span<const double> x{rows.data() + i * 10, 10};
        REQUIRE(serial[i] == kerf::kerf_predict(f, x));
    }
    REQUIRE_THROWS_AS(kerf::predict_rows(f, rows, 29, kerf::PredictMode::kerf),
                      std::invalid_argument);
}

TEST_CASE("forests reject malformed requests", "[forest]") {
    const Dataset data({0.5}, {1.0}, 1);
    REQUIRE_THROWS_AS(kerf::fit_forest(fixed_params(TreeKind::centred, 1), data, 0,
                                       false, RandomSource(1)),
                      std::invalid_argument);
    const Forest f = kerf::fit_forest(fixed_params(TreeKind::centred, 1), data, 1,
                                      false, RandomSource(1));
    const std::vector<double> wrong{0.5, 0.5};
    REQUIRE_THROWS_AS(kerf::forest_predict(f, wrong), std::invalid_argument);
}
