#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "kerf/dataset.hpp"
#include "kerf/random.hpp"
#include "kerf/threading.hpp"
#include "kerf/tree.hpp"

namespace kerf {

// M randomized trees over one training sample.  Tree j is grown from the
// derived source base.split(j) (bag draws and structure draws on separate
// child streams), so the ensemble is reproducible under any thread count
// and any prefix of the trees equals a smaller forest with the same base.
struct Forest {
    TreeParams params;
    bool bootstrap = false;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::shared_ptr<const Dataset> training;
    std::vector<PartitionTree> trees;

    std::size_t tree_count() const { return trees.size(); }
    int dim() const { return training->dim(); }
};

inline Forest fit_forest(const TreeParams& params, Dataset data, std::size_t M,
                         bool bootstrap, RandomSource base) {
    if (M == 0) throw std::invalid_argument("forest needs at least one tree");
    Forest f;
    f.params = params;
    f.bootstrap = bootstrap;
    f.seed = base.seed();
    f.stream = base.stream();
    f.training = std::make_shared<const Dataset>(std::move(data));
    f.trees.resize(M);
    const std::size_t n = f.training->size();
    parallel_for(M, [&](std::size_t j) {
        RandomSource src = base.split(j);
        std::vector<std::uint32_t> bag;
        if (bootstrap) {
            RandomSource bag_src = src.split(0);
            bag.resize(n);
            for (auto& id : bag)
                id = static_cast<std::uint32_t>(bag_src.below(n));
        }
        f.trees[j] = build_tree(params, *f.training, src.split(1), bag);
    });
    return f;
}

namespace detail {

inline void check_query(const Forest& f, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(f.dim()))
        throw std::invalid_argument("query dimension " + std::to_string(x.size()) +
                                    " does not match forest dimension " +
                                    std::to_string(f.dim()));
}

// Per-sample multiplicity in one tree's training multiset.
inline void bag_multiplicity(const PartitionTree& tree, std::size_t n,
                             std::vector<double>& mult) {
    mult.assign(n, tree.bag.empty() ? 1.0 : 0.0);
    for (const auto id : tree.bag) mult[id] += 1.0;
}

}  // namespace detail

// Average of the per-tree leaf means (empty leaves contribute 0).
inline double forest_predict(const Forest& f, std::span<const double> x) {
    detail::check_query(f, x);
    double acc = 0.0;
    for (const auto& t : f.trees) acc += t.predict(x);
    return acc / static_cast<double>(f.tree_count());
}

// Pooled estimate: all points falling with x anywhere in the forest are
// averaged together, weighting each leaf by its occupancy instead of
// equalising the trees.  Empty everywhere -> 0.
inline double kerf_predict(const Forest& f, std::span<const double> x) {
    detail::check_query(f, x);
    double num = 0.0;
    std::int64_t den = 0;
    for (const auto& t : f.trees) {
        const TreeNode& nd = t.nodes[static_cast<std::size_t>(t.locate(x))];
        num += nd.sum;
        den += nd.count;
    }
    return den == 0 ? 0.0 : num / static_cast<double>(den);
}

// Fraction of trees whose leaf contains both x and z.  Purely geometric:
// resampling weights do not enter.
inline double empirical_connection(const Forest& f, std::span<const double> x,
                                   std::span<const double> z) {
    detail::check_query(f, x);
    detail::check_query(f, z);
    std::size_t hits = 0;
    for (const auto& t : f.trees) hits += t.locate(x) == t.locate(z);
    return static_cast<double>(hits) / static_cast<double>(f.tree_count());
}

// The pooled estimate recomputed through its kernel form: weight every
// training point by the (bag-weighted) fraction of trees connecting it to x,
// then take the weighted response mean.  Agrees with kerf_predict up to
// floating-point summation order.
inline double kerf_predict_via_kernel(const Forest& f, std::span<const double> x) {
    detail::check_query(f, x);
    const Dataset& data = *f.training;
    const std::size_t n = data.size();
    std::vector<double> weight(n, 0.0);
    std::vector<double> mult;
    for (const auto& t : f.trees) {
        const int leaf = t.locate(x);
        detail::bag_multiplicity(t, n, mult);
        for (std::size_t i = 0; i < n; ++i) {
            if (mult[i] == 0.0) continue;
            if (t.locate(data.point(i)) == leaf) weight[i] += mult[i];
        }
    }
    const auto m = static_cast<double>(f.tree_count());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += data.response(i) * (weight[i] / m);
        den += weight[i] / m;
    }
    return den == 0.0 ? 0.0 : num / den;
}

// How far apart the two estimates can drift at x.  With every tree nonempty
// at x (a >= 1) and nonnegative responses, the ratio forest/pooled deviates
// from 1 by at most (b - a)/a, where a and b are the smallest and largest
// leaf occupancy across trees.
struct ProximityReport {
    std::int64_t min_count = 0;           // a: sparsest leaf at x
    std::int64_t max_count = 0;           // b: fullest leaf at x
    double bound = 0.0;                   // (b - a)/a; +inf when a == 0
    double forest_estimate = 0.0;
    double kerf_estimate = 0.0;
    double observed_gap = 0.0;            // |forest/pooled - 1|, 0/0 ratio = 1
    bool bound_defined = false;           // a >= 1
    bool responses_nonnegative = false;   // bound needs Y >= 0
    bool satisfied = false;               // vacuously true when preconditions fail
};

inline ProximityReport proximity_report(const Forest& f, std::span<const double> x) {
    detail::check_query(f, x);
    ProximityReport r;
    r.min_count = std::numeric_limits<std::int64_t>::max();
    r.max_count = 0;
    for (const auto& t : f.trees) {
        const std::int64_t c = t.leaf_count(x);
        r.min_count = std::min(r.min_count, c);
        r.max_count = std::max(r.max_count, c);
    }
    r.bound_defined = r.min_count >= 1;
    r.bound = r.bound_defined ? static_cast<double>(r.max_count - r.min_count) /
                                    static_cast<double>(r.min_count)
                              : std::numeric_limits<double>::infinity();
    r.forest_estimate = forest_predict(f, x);
    r.kerf_estimate = kerf_predict(f, x);
    r.responses_nonnegative = true;
    for (const double y : f.training->responses())
        if (y < 0.0) {
            r.responses_nonnegative = false;
            break;
        }
    double ratio;
    if (r.kerf_estimate == 0.0)
        ratio = r.forest_estimate == 0.0 ? 1.0
                                         : std::numeric_limits<double>::infinity();
    else
        ratio = r.forest_estimate / r.kerf_estimate;
    r.observed_gap = std::abs(ratio - 1.0);
    r.satisfied = !(r.bound_defined && r.responses_nonnegative) ||
                  r.observed_gap <= r.bound * (1.0 + 1e-12) + 1e-12;
    return r;
}

enum class PredictMode { forest, kerf };

// Predictions for many row-major query points, parallel over rows.
inline std::vector<double> predict_rows(const Forest& f,
                                        std::span<const double> rows,
                                        std::size_t nrows, PredictMode mode) {
    const auto d = static_cast<std::size_t>(f.dim());
    if (rows.size() != nrows * d)
        throw std::invalid_argument("query rows do not match forest dimension");
    std::vector<double> out(nrows);
    parallel_for(nrows, [&](std::size_t i) {
        const std::span<const double> x{rows.data() + i * d, d};
        out[i] = mode == PredictMode::forest ? forest_predict(f, x)
                                             : kerf_predict(f, x);
    });
    return out;
}

}  // namespace kerf
