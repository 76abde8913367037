#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kerf/dataset.hpp"
#include "kerf/forest.hpp"
#include "kerf/kernels.hpp"
#include "kerf/models.hpp"
#include "kerf/tree.hpp"

namespace kerf {

// The estimators compared in the benchmarks.  *_forest averages per-tree
// means, *_kerf pools occupancy-weighted responses across trees, and
// *_kerf_infinite evaluates the closed-form kernel directly (no trees).
enum class Estimator {
    breiman_forest,
    breiman_kerf,
    centred_forest,
    centred_kerf,
    centred_kerf_infinite,
    uniform_forest,
    uniform_kerf,
    uniform_kerf_infinite,
    median_forest,
    median_kerf,
};

inline std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::breiman_forest: return "breiman-forest";
        case Estimator::breiman_kerf: return "breiman-kerf";
        case Estimator::centred_forest: return "centred-forest";
        case Estimator::centred_kerf: return "centred-kerf";
        case Estimator::centred_kerf_infinite: return "centred-kerf-infinite";
        case Estimator::uniform_forest: return "uniform-forest";
        case Estimator::uniform_kerf: return "uniform-kerf";
        case Estimator::uniform_kerf_infinite: return "uniform-kerf-infinite";
        case Estimator::median_forest: return "median-forest";
        case Estimator::median_kerf: return "median-kerf";
    }
    return "?";
}

inline Estimator estimator_from_string(std::string_view s) {
    for (const Estimator e :
         {Estimator::breiman_forest, Estimator::breiman_kerf,
          Estimator::centred_forest, Estimator::centred_kerf,
          Estimator::centred_kerf_infinite, Estimator::uniform_forest,
          Estimator::uniform_kerf, Estimator::uniform_kerf_infinite,
          Estimator::median_forest, Estimator::median_kerf})
        if (to_string(e) == s) return e;
    throw DataError("unknown estimator '" + std::string(s) + "'");
}

// Tree level selection: fixed value, or floor(log2 n) from the full sample.
struct LevelPolicy {
    bool automatic = true;
    int level = 0;

    int resolve(std::size_t n, int d) const {
        if (!automatic) return level;
        return suggest_level(n, d, LevelRule::experiment);
    }
};

struct ExperimentSpec {
    int model_id = 1;
    std::size_t n = 0;   // 0: model default
    int d = 0;           // 0: model default
    std::vector<Estimator> estimators;
    std::size_t trees = 100;
    LevelPolicy level{};
    bool bootstrap = false;
    std::size_t repetitions = 10;
    double train_fraction = 0.8;
    BreimanParams breiman{};
    std::uint64_t seed = 1;
    // Closed-form estimators cost O(n * d * k^2) per query; refuse absurd
    // combinations instead of hanging.
    std::size_t infinite_budget = 4096;   // maximum allowed d*k
};

struct EstimatorSummary {
    Estimator estimator = Estimator::centred_kerf;
    std::vector<double> risks;   // one per repetition
    double mean_risk = 0.0;
    double stddev_risk = 0.0;    // sample standard deviation across repetitions
};

struct RunReport {
    ExperimentSpec spec;         // with n/d resolved to actual values
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    int level_used = 0;
    std::vector<EstimatorSummary> results;
};

namespace detail {

inline TreeKind estimator_tree_kind(Estimator e) {
    switch (e) {
        case Estimator::breiman_forest:
        case Estimator::breiman_kerf: return TreeKind::breiman;
        case Estimator::centred_forest:
        case Estimator::centred_kerf:
        case Estimator::centred_kerf_infinite: return TreeKind::centred;
        case Estimator::uniform_forest:
        case Estimator::uniform_kerf:
        case Estimator::uniform_kerf_infinite: return TreeKind::uniform;
        case Estimator::median_forest:
        case Estimator::median_kerf: return TreeKind::median;
    }
    throw DataError("unknown estimator");
}

inline bool estimator_is_infinite(Estimator e) {
    return e == Estimator::centred_kerf_infinite ||
           e == Estimator::uniform_kerf_infinite;
}

// Stable stream offset per tree kind, so adding or reordering estimators in
// the spec never changes another estimator's numbers.
inline std::uint64_t kind_stream(TreeKind k) {
    switch (k) {
        case TreeKind::centred: return 2;
        case TreeKind::uniform: return 3;
        case TreeKind::median: return 4;
        case TreeKind::breiman: return 5;
    }
    return 6;
}

inline void accumulate_moments(EstimatorSummary& s) {
    double mean = 0.0;
    for (const double r : s.risks) mean += r;
    mean /= static_cast<double>(s.risks.size());
    double var = 0.0;
    for (const double r : s.risks) var += (r - mean) * (r - mean);
    s.mean_risk = mean;
    s.stddev_risk = s.risks.size() > 1
                        ? std::sqrt(var / static_cast<double>(s.risks.size() - 1))
                        : 0.0;
}

}  // namespace detail

// One benchmark run: `repetitions` times, draw the model, split train/test,
// fit one forest per tree kind in play, and score every requested estimator
// on the same test split by mean squared error against the observed
// responses.  Fully determined by the spec (seed included).
inline RunReport run_experiment(ExperimentSpec spec) {
    const SyntheticModel base = synthetic_model(spec.model_id);
    if (spec.n == 0) spec.n = base.n;
    if (spec.d == 0) spec.d = base.d;
    const SyntheticModel model = synthetic_model(spec.model_id, spec.n, spec.d);
    if (spec.estimators.empty()) throw DataError("no estimators requested");
    if (spec.repetitions == 0) throw DataError("need at least one repetition");
    if (spec.trees == 0) throw DataError("need at least one tree");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw DataError("train fraction must lie strictly between 0 and 1");

    RunReport report;
    report.level_used = spec.level.resolve(spec.n, spec.d);
    for (const Estimator e : spec.estimators)
        if (detail::estimator_is_infinite(e)) {
            const auto load = static_cast<std::size_t>(spec.d) *
                              static_cast<std::size_t>(report.level_used);
            if (load > spec.infinite_budget)
                throw DataError(to_string(e) + " needs d*k <= " +
                                std::to_string(spec.infinite_budget) + ", got " +
                                std::to_string(load));
        }

    report.results.resize(spec.estimators.size());
    for (std::size_t i = 0; i < spec.estimators.size(); ++i)
        report.results[i].estimator = spec.estimators[i];

    RandomSource rng(spec.seed);
    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        RandomSource src = rng.split(rep);
        Dataset data = generate(model, src.split(0));
        auto [train, test] = split_train_test(data, spec.train_fraction,
                                              src.split(1));
        report.n_train = train.size();
        report.n_test = test.size();

        // One forest per tree kind involved this run.
        std::vector<std::pair<TreeKind, Forest>> forests;
        for (const Estimator e : spec.estimators) {
            if (detail::estimator_is_infinite(e)) continue;
            const TreeKind kind = detail::estimator_tree_kind(e);
            bool have = false;
            for (const auto& [k, f] : forests) have = have || k == kind;
            if (have) continue;
            TreeParams params{kind, report.level_used, spec.breiman};
            forests.emplace_back(kind,
                                 fit_forest(params, train, spec.trees,
                                            spec.bootstrap,
                                            src.split(detail::kind_stream(kind))));
        }

        for (std::size_t i = 0; i < spec.estimators.size(); ++i) {
            const Estimator e = spec.estimators[i];
            std::vector<double> pred;
            if (detail::estimator_is_infinite(e)) {
                const AnalyticKernel kernel{
                    e == Estimator::centred_kerf_infinite ? KernelFamily::centred
                                                          : KernelFamily::uniform,
                    report.level_used, KernelStrategy::dp_convolution};
                pred.resize(test.size());
                parallel_for(test.size(), [&](std::size_t q) {
                    pred[q] = infinite_kerf_predict(train, test.point(q), kernel);
                });
            } else {
                const TreeKind kind = detail::estimator_tree_kind(e);
                const Forest* forest = nullptr;
                for (const auto& [k, f] : forests)
                    if (k == kind) forest = &f;
                const bool pooled = e == Estimator::breiman_kerf ||
                                    e == Estimator::centred_kerf ||
                                    e == Estimator::uniform_kerf ||
                                    e == Estimator::median_kerf;
                pred = predict_rows(*forest, test.coords(), test.size(),
                                    pooled ? PredictMode::kerf
                                           : PredictMode::forest);
            }
            report.results[i].risks.push_back(
                empirical_risk(pred, test.responses()));
        }
    }
    for (auto& s : report.results) detail::accumulate_moments(s);
    report.spec = std::move(spec);
    return report;
}

// Risk of the pooled estimator along a grid of forest sizes, against the
// closed-form infinite-forest risk.  Thanks to per-tree streams, the M-tree
// prefix of one big forest is exactly the M-tree forest, so the whole curve
// comes from a single fit per repetition.
struct ConvergenceSpec {
    int model_id = 2;
    std::size_t n = 100;
    int d = 10;
    KernelFamily family = KernelFamily::centred;
    std::vector<std::size_t> tree_grid{1, 4, 16, 64, 256, 1000};
    LevelPolicy level{};
    std::size_t repetitions = 10;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
};

struct ConvergenceReport {
    ConvergenceSpec spec;
    int level_used = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::vector<double>> finite_risks;   // [repetition][grid index]
    std::vector<double> infinite_risks;              // per repetition
    std::vector<double> finite_risk_mean;            // per grid index
    double infinite_risk_mean = 0.0;
};

inline ConvergenceReport convergence_curve(ConvergenceSpec spec) {
    if (spec.tree_grid.empty()) throw DataError("tree grid is empty");
    for (std::size_t i = 1; i < spec.tree_grid.size(); ++i)
        if (spec.tree_grid[i] <= spec.tree_grid[i - 1])
            throw DataError("tree grid must be strictly increasing");
    const SyntheticModel model = synthetic_model(spec.model_id, spec.n, spec.d);

    ConvergenceReport report;
    report.level_used = spec.level.resolve(spec.n, spec.d);
    const TreeKind kind = spec.family == KernelFamily::centred ? TreeKind::centred
                                                               : TreeKind::uniform;
    const AnalyticKernel kernel{spec.family, report.level_used,
                                KernelStrategy::dp_convolution};
    const std::size_t m_max = spec.tree_grid.back();

    RandomSource rng(spec.seed);
    report.finite_risk_mean.assign(spec.tree_grid.size(), 0.0);
    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        RandomSource src = rng.split(rep);
        Dataset data = generate(model, src.split(0));
        auto [train, test] = split_train_test(data, spec.train_fraction,
                                              src.split(1));
        report.n_train = train.size();
        report.n_test = test.size();
        TreeParams params{kind, report.level_used, {}};
        Forest forest = fit_forest(params, std::move(train), m_max, false,
                                   src.split(2));

        // Running pooled sums give every prefix size in one pass.
        std::vector<std::vector<double>> preds(
            spec.tree_grid.size(), std::vector<double>(test.size(), 0.0));
        std::vector<double> inf_pred(test.size());
        parallel_for(test.size(), [&](std::size_t q) {
            const auto x = test.point(q);
            double num = 0.0;
            std::int64_t den = 0;
            std::size_t gi = 0;
            for (std::size_t j = 0; j < m_max; ++j) {
                const auto& t = forest.trees[j];
                const TreeNode& nd =
                    t.nodes[static_cast<std::size_t>(t.locate(x))];
                num += nd.sum;
                den += nd.count;
                while (gi < spec.tree_grid.size() &&
                       spec.tree_grid[gi] == j + 1) {
                    preds[gi][q] =
                        den == 0 ? 0.0 : num / static_cast<double>(den);
                    ++gi;
                }
            }
            inf_pred[q] = infinite_kerf_predict(*forest.training, x, kernel);
        });

        std::vector<double> row;
        for (std::size_t gi = 0; gi < spec.tree_grid.size(); ++gi) {
            const double risk = empirical_risk(preds[gi], test.responses());
            row.push_back(risk);
            report.finite_risk_mean[gi] += risk;
        }
        report.finite_risks.push_back(std::move(row));
        const double ri = empirical_risk(inf_pred, test.responses());
        report.infinite_risks.push_back(ri);
        report.infinite_risk_mean += ri;
    }
    for (auto& v : report.finite_risk_mean)
        v /= static_cast<double>(spec.repetitions);
    report.infinite_risk_mean /= static_cast<double>(spec.repetitions);
    report.spec = std::move(spec);
    return report;
}

// The benchmark table rows: every model with its default estimators.
inline ExperimentSpec benchmark_preset(int model_id) {
    ExperimentSpec spec;
    const SyntheticModel model = synthetic_model(model_id);
    spec.model_id = model_id;
    spec.n = model.n;
    spec.d = model.d;
    spec.estimators = {Estimator::breiman_forest, Estimator::breiman_kerf,
                       Estimator::centred_forest, Estimator::centred_kerf,
                       Estimator::uniform_forest, Estimator::uniform_kerf};
    spec.trees = 100;
    spec.repetitions = 10;
    return spec;
}

}  // namespace kerf
