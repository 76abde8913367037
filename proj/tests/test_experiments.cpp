// Benchmark harness: estimator naming, experiment runs, convergence curves,
// and the JSON persistence of forests, specs, and reports.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "kerf/experiments.hpp"
#include "kerf/io.hpp"

using kerf::DataError;
using kerf::Estimator;
using kerf::ExperimentSpec;
using kerf::RandomSource;

TEST_CASE("estimator names round-trip", "[experiments]") {
    for (const Estimator e :
         {Estimator::breiman_forest, Estimator::breiman_kerf,
          Estimator::centred_forest, Estimator::centred_kerf,
          Estimator::uniform_forest, Estimator::uniform_kerf,
          Estimator::median_forest, Estimator::median_kerf,
          Estimator::centred_kerf_infinite, Estimator::uniform_kerf_infinite})
        REQUIRE(kerf::estimator_from_string(kerf::to_string(e)) == e);
    REQUIRE_THROWS_AS(kerf::estimator_from_string("boosting"), DataError);
}

TEST_CASE("experiments are deterministic in their spec", "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 40;
    spec.d = 2;
    spec.estimators = {Estimator::breiman_forest, Estimator::breiman_kerf};
    spec.trees = 10;
    spec.repetitions = 2;
    spec.seed = 9;

    const kerf::RunReport a = kerf::run_experiment(spec);
    const kerf::RunReport b = kerf::run_experiment(spec);
    REQUIRE(a.n_train == 32);
    REQUIRE(a.n_test == 8);
    REQUIRE(a.results.size() == 2);
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        REQUIRE(a.results[i].risks == b.results[i].risks);
        REQUIRE(a.results[i].mean_risk == b.results[i].mean_risk);
        for (const double r : a.results[i].risks) REQUIRE(r >= 0.0);
    }
}

TEST_CASE("estimator selection does not disturb other estimators",
          "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 40;
    spec.d = 2;
    spec.estimators = {Estimator::centred_forest, Estimator::breiman_forest};
    spec.trees = 8;
    spec.repetitions = 2;
    spec.seed = 12;
    const kerf::RunReport both = kerf::run_experiment(spec);

    spec.estimators = {Estimator::centred_forest};
    const kerf::RunReport alone = kerf::run_experiment(spec);
    REQUIRE(both.results[0].risks == alone.results[0].risks);
}

TEST_CASE("fully grown greedy trees erase the forest/pooled distinction",
          "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 50;
    spec.d = 3;
    spec.estimators = {Estimator::breiman_forest, Estimator::breiman_kerf};
    spec.trees = 10;
    spec.repetitions = 3;
    spec.breiman.min_samples_split = 2;
    spec.seed = 4;
    const kerf::RunReport r = kerf::run_experiment(spec);
    for (std::size_t rep = 0; rep < 3; ++rep)
        REQUIRE_THAT(r.results[0].risks[rep],
                     Catch::Matchers::WithinAbs(r.results[1].risks[rep], 1e-12));
}

TEST_CASE("tiny samples still run with a one-point test set", "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 5;
    spec.d = 2;
    spec.estimators = {Estimator::centred_forest};
    spec.trees = 3;
    spec.repetitions = 1;
    spec.seed = 2;
    const kerf::RunReport r = kerf::run_experiment(spec);
    REQUIRE(r.n_test == 1);
    REQUIRE(r.results[0].risks.size() == 1);
}

TEST_CASE("closed-form estimators respect the size budget", "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 2;
    spec.n = 30;
    spec.d = 10;
    spec.estimators = {Estimator::centred_kerf_infinite};
    spec.trees = 2;
    spec.repetitions = 1;
    spec.level = {.automatic = false, .level = 4};
    spec.seed = 3;
    spec.infinite_budget = 10;   // d*k = 40 exceeds this
    REQUIRE_THROWS_WITH(kerf::run_experiment(spec),
                        Catch::Matchers::ContainsSubstring("centred-kerf-infinite"));
    spec.infinite_budget = 4096;
    const kerf::RunReport r = kerf::run_experiment(spec);
    REQUIRE(r.results[0].risks[0] >= 0.0);
}

TEST_CASE("experiment validation rejects contradictory specs", "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 20;
    spec.d = 2;
    spec.trees = 5;
    spec.repetitions = 1;
    spec.estimators = {};
    REQUIRE_THROWS_AS(kerf::run_experiment(spec), DataError);
    spec.estimators = {Estimator::centred_forest};
    spec.trees = 0;
    REQUIRE_THROWS_AS(kerf::run_experiment(spec), DataError);
    spec.trees = 5;
    spec.train_fraction = 1.5;
    REQUIRE_THROWS_AS(kerf::run_experiment(spec), DataError);
}

TEST_CASE("the risk curve heads towards the closed-form limit", "[experiments]") {
    kerf::ConvergenceSpec spec;
    spec.model_id = 2;
    spec.n = 40;
    spec.d = 10;
    spec.tree_grid = {1, 8};
    spec.level = {.automatic = false, .level = 3};
    spec.repetitions = 2;
    spec.seed = 5;
    const kerf::ConvergenceReport r = kerf::convergence_curve(spec);
    REQUIRE(r.finite_risk_mean.size() == 2);
    REQUIRE(r.finite_risks.size() == 2);
    REQUIRE(r.infinite_risks.size() == 2);
    REQUIRE(r.level_used == 3);

    const kerf::ConvergenceReport again = kerf::convergence_curve(spec);
    REQUIRE(r.finite_risk_mean == again.finite_risk_mean);
    REQUIRE(r.infinite_risk_mean == again.infinite_risk_mean);

    kerf::ConvergenceSpec bad = spec;
    bad.tree_grid = {8, 8};
    REQUIRE_THROWS_AS(kerf::convergence_curve(bad), DataError);
    bad.tree_grid = {};
    REQUIRE_THROWS_AS(kerf::convergence_curve(bad), DataError);
    bad.tree_grid = {4};
    REQUIRE(kerf::convergence_curve(bad).finite_risk_mean.size() == 1);
}

TEST_CASE("benchmark presets mirror the model table", "[experiments]") {
    const ExperimentSpec spec = kerf::benchmark_preset(5);
    REQUIRE(spec.model_id == 5);
    REQUIRE(spec.n == 700);
    REQUIRE(spec.d == 20);
    REQUIRE(spec.estimators.size() == 6);
    REQUIRE(spec.trees == 100);
}

TEST_CASE("forests survive the JSON round trip bit-exactly", "[experiments]") {
    RandomSource rng(6);
    const kerf::Dataset data =
        kerf::generate(kerf::synthetic_model(2, 40, 10), rng.split(0));
    kerf::TreeParams params;
    params.kind = kerf::TreeKind::breiman;
    const kerf::Forest f = kerf::fit_forest(params, data, 5, true, rng.split(1));

    const nlohmann::json j = kerf::forest_to_json(f);
    const kerf::Forest g = kerf::forest_from_json(j);
    REQUIRE(kerf::forest_to_json(g).dump() == j.dump());

    RandomSource qr = rng.split(2);
    for (int q = 0; q < 40; ++q) {
        std::vector<double> x(10);
        for (auto& v : x) v = qr.next_double();
        REQUIRE(kerf::forest_predict(f, x) == kerf::forest_predict(g, x));
        REQUIRE(kerf::kerf_predict(f, x) == kerf::kerf_predict(g, x));
    }
}

TEST_CASE("forest files reject corrupted content", "[experiments]") {
    RandomSource rng(7);
    const kerf::Dataset data =
        kerf::generate(kerf::synthetic_model(1, 10, 2), rng.split(0));
    kerf::TreeParams params;
    params.kind = kerf::TreeKind::centred;
    params.level = 2;
    const kerf::Forest f = kerf::fit_forest(params, data, 2, false, rng.split(1));
    nlohmann::json j = kerf::forest_to_json(f);

    nlohmann::json wrong_format = j;
    wrong_format["format"] = "something-else";
    REQUIRE_THROWS_AS(kerf::forest_from_json(wrong_format), DataError);

    nlohmann::json missing = j;
    missing.erase("trees");
    REQUIRE_THROWS_AS(kerf::forest_from_json(missing), DataError);

    nlohmann::json bad_node = j;
    bad_node["trees"][0]["nodes"][0][2] = 9999;   // child index out of range
    REQUIRE_THROWS_AS(kerf::forest_from_json(bad_node), DataError);

    nlohmann::json bad_bag = j;
    bad_bag["trees"][0]["bag"] = {42};
    REQUIRE_THROWS_AS(kerf::forest_from_json(bad_bag), DataError);
}

TEST_CASE("forest persistence works through files", "[experiments]") {
    RandomSource rng(8);
    const kerf::Dataset data =
        kerf::generate(kerf::synthetic_model(1, 12, 2), rng.split(0));
    kerf::TreeParams params;
    params.kind = kerf::TreeKind::uniform;
    params.level = 2;
    const kerf::Forest f = kerf::fit_forest(params, data, 3, false, rng.split(1));

    const std::string path = "kerf_test_forest.json";
    kerf::save_forest(f, path);
    const kerf::Forest g = kerf::load_forest(path);
    REQUIRE(kerf::forest_to_json(g).dump() == kerf::forest_to_json(f).dump());
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(kerf::load_forest(path), DataError);
}

TEST_CASE("experiment specs parse from JSON with strict keys", "[experiments]") {
    const nlohmann::json j = {{"model", 1},
                              {"n", 64},
                              {"d", 3},
                              {"estimators", {"centred-forest", "centred-kerf"}},
                              {"trees", 7},
                              {"level", "auto"},
                              {"bootstrap", true},
                              {"repetitions", 2},
                              {"seed", 11}};
    const ExperimentSpec spec = kerf::experiment_spec_from_json(j);
    REQUIRE(spec.model_id == 1);
    REQUIRE(spec.n == 64);
    REQUIRE(spec.d == 3);
    REQUIRE(spec.estimators ==
            std::vector<Estimator>{Estimator::centred_forest, Estimator::centred_kerf});
    REQUIRE(spec.trees == 7);
    REQUIRE(spec.level.automatic);
    REQUIRE(spec.bootstrap);
    REQUIRE(spec.seed == 11);

    nlohmann::json fixed_level = j;
    fixed_level["level"] = 4;
    REQUIRE(kerf::experiment_spec_from_json(fixed_level).level.level == 4);
    REQUIRE(!kerf::experiment_spec_from_json(fixed_level).level.automatic);

    nlohmann::json unknown = j;
    unknown["surprise"] = 1;
    REQUIRE_THROWS_WITH(kerf::experiment_spec_from_json(unknown),
                        Catch::Matchers::ContainsSubstring("surprise"));

    nlohmann::json bad_level = j;
    bad_level["level"] = "deep";
    REQUIRE_THROWS_AS(kerf::experiment_spec_from_json(bad_level), DataError);

    nlohmann::json missing_model = j;
    missing_model.erase("model");
    REQUIRE_THROWS_AS(kerf::experiment_spec_from_json(missing_model), DataError);
}

TEST_CASE("convergence specs parse from JSON", "[experiments]") {
    const nlohmann::json j = {{"model", 2}, {"n", 50},
                              {"d", 10},    {"family", "uniform"},
                              {"tree_grid", {1, 2, 4}}, {"seed", 3}};
    const kerf::ConvergenceSpec spec = kerf::convergence_spec_from_json(j);
    REQUIRE(spec.family == kerf::KernelFamily::uniform);
    REQUIRE(spec.tree_grid == std::vector<std::size_t>{1, 2, 4});
    nlohmann::json bad = j;
    bad["family"] = "median";
    REQUIRE_THROWS_AS(kerf::convergence_spec_from_json(bad), DataError);
}

TEST_CASE("reports serialize with stable fields", "[experiments]") {
    ExperimentSpec spec;
    spec.model_id = 1;
    spec.n = 30;
    spec.d = 2;
    spec.estimators = {Estimator::centred_kerf};
    spec.trees = 4;
    spec.repetitions = 2;
    spec.seed = 13;
    const kerf::RunReport r = kerf::run_experiment(spec);
    const nlohmann::json j = kerf::to_json(r);
    REQUIRE(j.at("spec").at("model") == 1);
    REQUIRE(j.at("results").size() == 1);
    REQUIRE(j.at("results")[0].at("estimator") == "centred-kerf");
    REQUIRE(j.at("results")[0].at("risks").size() == 2);

    const auto checks = kerf::verify_suite("identities", {.seed = 1, .quick = true});
    const nlohmann::json vr = kerf::verify_report_json("identities", checks);
    REQUIRE(vr.at("total") == checks.size());
    REQUIRE(vr.at("failed") == 0);
    REQUIRE(vr.at("checks").size() == checks.size());
}
