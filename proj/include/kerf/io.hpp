#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kerf/dataset.hpp"
#include "kerf/experiments.hpp"
#include "kerf/forest.hpp"
#include "kerf/theory.hpp"
#include "kerf/tree.hpp"

namespace kerf {

// Forest persistence.  Everything needed to reproduce predictions is kept:
// tree structure with leaf statistics, per-tree bags, and the training
// sample (the kernel-form estimate and the proximity report need it).
// Node rows are [split_dim, split_pos, left, right, count, sum] with
// split_dim -1 for leaves; doubles survive the round trip bit-exactly.

inline nlohmann::json forest_to_json(const Forest& f) {
    nlohmann::json j;
    j["format"] = "kerf-forest";
    j["version"] = 1;
    j["kind"] = to_string(f.params.kind);
    j["level"] = f.params.level;
    j["breiman"] = {{"min_samples_split", f.params.breiman.min_samples_split},
                    {"min_leaf", f.params.breiman.min_leaf},
                    {"max_features", f.params.breiman.max_features}};
    j["bootstrap"] = f.bootstrap;
    j["seed"] = f.seed;
    j["stream"] = f.stream;
    j["dim"] = f.training->dim();
    j["training"] = {
        {"coords", std::vector<double>(f.training->coords().begin(),
                                       f.training->coords().end())},
        {"responses", std::vector<double>(f.training->responses().begin(),
                                          f.training->responses().end())}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& nd : t.nodes)
            nodes.push_back({nd.split_dim, nd.split_pos, nd.left, nd.right,
                             nd.count, nd.sum});
        nlohmann::json tree;
        tree["nodes"] = std::move(nodes);
        if (!t.bag.empty()) tree["bag"] = t.bag;
        trees.push_back(std::move(tree));
    }
    j["trees"] = std::move(trees);
    return j;
}

inline Forest forest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "kerf-forest")
            throw DataError("not a forest file (missing format marker)");
        if (j.at("version") != 1)
            throw DataError("unsupported forest file version");
        Forest f;
        f.params.kind = tree_kind_from_string(j.at("kind").get<std::string>());
        f.params.level = j.at("level").get<int>();
        const auto& bp = j.at("breiman");
        f.params.breiman.min_samples_split =
            bp.at("min_samples_split").get<std::size_t>();
        f.params.breiman.min_leaf = bp.at("min_leaf").get<std::size_t>();
        f.params.breiman.max_features = bp.at("max_features").get<double>();
        f.bootstrap = j.at("bootstrap").get<bool>();
        f.seed = j.at("seed").get<std::uint64_t>();
        f.stream = j.at("stream").get<std::uint64_t>();
        const int dim = j.at("dim").get<int>();
        auto coords = j.at("training").at("coords").get<std::vector<double>>();
        auto responses =
            j.at("training").at("responses").get<std::vector<double>>();
        f.training = std::make_shared<const Dataset>(std::move(coords),
                                                     std::move(responses), dim);
        const auto& trees = j.at("trees");
        if (!trees.is_array() || trees.empty())
            throw DataError("forest file holds no trees");
        for (const auto& tj : trees) {
            PartitionTree t;
            t.params = f.params;
            t.dim = dim;
            const auto& nodes = tj.at("nodes");
            for (const auto& nj : nodes) {
                if (!nj.is_array() || nj.size() != 6)
                    throw DataError("malformed tree node row");
                TreeNode nd;
                nd.split_dim = nj[0].get<int>();
                nd.split_pos = nj[1].get<double>();
                nd.left = nj[2].get<std::int32_t>();
                nd.right = nj[3].get<std::int32_t>();
                nd.count = nj[4].get<std::int64_t>();
                nd.sum = nj[5].get<double>();
                const auto limit = static_cast<std::int32_t>(nodes.size());
                if (nd.split_dim >= dim ||
                    (nd.split_dim >= 0 &&
                     (nd.left < 0 || nd.left >= limit || nd.right < 0 ||
                      nd.right >= limit)))
                    throw DataError("tree node references are out of range");
                t.nodes.push_back(nd);
            }
            if (t.nodes.empty()) throw DataError("tree without nodes");
            if (tj.contains("bag")) {
                t.bag = tj.at("bag").get<std::vector<std::uint32_t>>();
                for (const auto id : t.bag)
                    if (id >= f.training->size())
                        throw DataError("bag entry outside the training sample");
            }
            f.trees.push_back(std::move(t));
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed forest file: ") + e.what());
    }
}

inline void save_forest(const Forest& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << forest_to_json(f).dump(1, '\t') << '\n';
    if (!out) throw DataError("failed while writing '" + path + "'");
}

inline Forest load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    try {
        return forest_from_json(j);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

// --- report serialization --------------------------------------------------

inline nlohmann::json to_json(const BoundReport& r) {
    return {{"name", r.name},         {"observed", r.observed},
            {"lower", r.lower},       {"upper", r.upper},
            {"tolerance", r.tolerance}, {"uncertainty", r.uncertainty},
            {"satisfied", r.satisfied}};
}

inline nlohmann::json verify_report_json(std::string_view suite,
                                         const std::vector<BoundReport>& checks) {
    std::size_t failed = 0;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) {
        arr.push_back(to_json(c));
        failed += c.satisfied ? 0 : 1;
    }
    return {{"suite", std::string(suite)},
            {"checks", std::move(arr)},
            {"total", checks.size()},
            {"failed", failed},
            {"passed", checks.size() - failed}};
}

inline nlohmann::json to_json(const RunReport& r) {
    nlohmann::json spec;
    spec["model"] = r.spec.model_id;
    spec["n"] = r.spec.n;
    spec["d"] = r.spec.d;
    std::vector<std::string> estimators;
    for (const Estimator e : r.spec.estimators) estimators.push_back(to_string(e));
    spec["estimators"] = estimators;
    spec["trees"] = r.spec.trees;
    if (r.spec.level.automatic)
        spec["level"] = "auto";
    else
        spec["level"] = r.spec.level.level;
    spec["bootstrap"] = r.spec.bootstrap;
    spec["repetitions"] = r.spec.repetitions;
    spec["train_fraction"] = r.spec.train_fraction;
    spec["breiman"] = {{"min_samples_split", r.spec.breiman.min_samples_split},
                       {"min_leaf", r.spec.breiman.min_leaf},
                       {"max_features", r.spec.breiman.max_features}};
    spec["seed"] = r.spec.seed;

    nlohmann::json results = nlohmann::json::array();
    for (const auto& s : r.results)
        results.push_back({{"estimator", to_string(s.estimator)},
                           {"mean_risk", s.mean_risk},
                           {"stddev_risk", s.stddev_risk},
                           {"risks", s.risks}});
    return {{"spec", std::move(spec)},
            {"n_train", r.n_train},
            {"n_test", r.n_test},
            {"level_used", r.level_used},
            {"results", std::move(results)}};
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json spec;
    spec["model"] = r.spec.model_id;
    spec["n"] = r.spec.n;
    spec["d"] = r.spec.d;
    spec["family"] = to_string(r.spec.family);
    spec["tree_grid"] = r.spec.tree_grid;
    if (r.spec.level.automatic)
        spec["level"] = "auto";
    else
        spec["level"] = r.spec.level.level;
    spec["repetitions"] = r.spec.repetitions;
    spec["train_fraction"] = r.spec.train_fraction;
    spec["seed"] = r.spec.seed;
    return {{"spec", std::move(spec)},
            {"level_used", r.level_used},
            {"n_train", r.n_train},
            {"n_test", r.n_test},
            {"finite_risks", r.finite_risks},
            {"finite_risk_mean", r.finite_risk_mean},
            {"infinite_risks", r.infinite_risks},
            {"infinite_risk_mean", r.infinite_risk_mean}};
}

// --- config parsing ----------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw DataError("unknown config key '" + key + "'");
    }
}

inline LevelPolicy level_policy_from_json(const nlohmann::json& j) {
    LevelPolicy p;
    if (j.is_string()) {
        if (j.get<std::string>() != "auto")
            throw DataError("level must be \"auto\" or an integer");
        return p;
    }
    if (!j.is_number_integer())
        throw DataError("level must be \"auto\" or an integer");
    p.automatic = false;
    p.level = j.get<int>();
    if (p.level < 0) throw DataError("level must be nonnegative");
    return p;
}

}  // namespace detail

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
    try {
        detail::reject_unknown_keys(
            j, {"model", "n", "d", "estimators", "trees", "level", "bootstrap",
                "repetitions", "train_fraction", "breiman", "seed",
                "infinite_budget"});
        ExperimentSpec spec = benchmark_preset(j.at("model").get<int>());
        if (j.contains("n")) spec.n = j.at("n").get<std::size_t>();
        if (j.contains("d")) spec.d = j.at("d").get<int>();
        if (j.contains("estimators")) {
            spec.estimators.clear();
            for (const auto& e : j.at("estimators"))
                spec.estimators.push_back(
                    estimator_from_string(e.get<std::string>()));
        }
        if (j.contains("trees")) spec.trees = j.at("trees").get<std::size_t>();
        if (j.contains("level"))
            spec.level = detail::level_policy_from_json(j.at("level"));
        if (j.contains("bootstrap")) spec.bootstrap = j.at("bootstrap").get<bool>();
        if (j.contains("repetitions"))
            spec.repetitions = j.at("repetitions").get<std::size_t>();
        if (j.contains("train_fraction"))
            spec.train_fraction = j.at("train_fraction").get<double>();
        if (j.contains("breiman")) {
            const auto& bp = j.at("breiman");
            detail::reject_unknown_keys(
                bp, {"min_samples_split", "min_leaf", "max_features"});
            if (bp.contains("min_samples_split"))
                spec.breiman.min_samples_split =
                    bp.at("min_samples_split").get<std::size_t>();
            if (bp.contains("min_leaf"))
                spec.breiman.min_leaf = bp.at("min_leaf").get<std::size_t>();
            if (bp.contains("max_features"))
                spec.breiman.max_features = bp.at("max_features").get<double>();
        }
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("infinite_budget"))
            spec.infinite_budget = j.at("infinite_budget").get<std::size_t>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed experiment config: ") + e.what());
    }
}

inline ConvergenceSpec convergence_spec_from_json(const nlohmann::json& j) {
    try {
        detail::reject_unknown_keys(
            j, {"model", "n", "d", "family", "tree_grid", "level", "repetitions",
                "train_fraction", "seed"});
        ConvergenceSpec spec;
        if (j.contains("model")) spec.model_id = j.at("model").get<int>();
        if (j.contains("n")) spec.n = j.at("n").get<std::size_t>();
        if (j.contains("d")) spec.d = j.at("d").get<int>();
        if (j.contains("family")) {
            const auto f = j.at("family").get<std::string>();
            if (f == "centred")
                spec.family = KernelFamily::centred;
            else if (f == "uniform")
                spec.family = KernelFamily::uniform;
            else
                throw DataError("family must be centred or uniform");
        }
        if (j.contains("tree_grid"))
            spec.tree_grid = j.at("tree_grid").get<std::vector<std::size_t>>();
        if (j.contains("level"))
            spec.level = detail::level_policy_from_json(j.at("level"));
        if (j.contains("repetitions"))
            spec.repetitions = j.at("repetitions").get<std::size_t>();
        if (j.contains("train_fraction"))
            spec.train_fraction = j.at("train_fraction").get<double>();
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed convergence config: ") + e.what());
    }
}

}  // namespace kerf
