// kerf — fit randomized regression forests, evaluate their kernel forms,
// and run the numerical verification and benchmark suites.
//
// Exit codes: 0 success, 2 flag error, 3 data error, 4 verification failure.
// Outputs are byte-reproducible for a fixed seed regardless of KERF_THREADS;
// timings therefore go to stderr and only when --timings is given.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kerf/kerf.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFlag = 2;
constexpr int kExitData = 3;
constexpr int kExitVerify = 4;

struct Timer {
    bool enabled = false;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    ~Timer() {
        if (!enabled) return;
        const auto elapsed = std::chrono::steady_clock::now() - start;
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        std::cerr << "elapsed: " << ms << " ms\n";
    }
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kerf::DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw kerf::DataError("failed while writing '" + path + "'");
}

// Emit to the named file, or to stdout when no file was requested.
void emit(const std::optional<std::string>& path, const std::string& text) {
    if (path)
        write_text_file(*path, text);
    else
        std::cout << text;
}

std::string csv_text(std::span<const std::string> names,
                     std::span<const double> values, std::size_t rows) {
    std::ostringstream out;
    kerf::write_csv(out, names, values, rows);
    return out.str();
}

std::vector<double> parse_point(const std::string& text, int d) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            out.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw kerf::DataError("cannot parse coordinate '" + field + "'");
        }
    }
    if (out.size() != static_cast<std::size_t>(d))
        throw kerf::DataError("expected " + std::to_string(d) +
                              " comma-separated coordinates, found " +
                              std::to_string(out.size()));
    return out;
}

// --- fit ---------------------------------------------------------------------

struct FitArgs {
    std::string data;
    std::string response;
    std::string kind = "centred";
    std::size_t trees = 100;
    int level = -1;        // -1: resolve automatically
    bool bootstrap = false;
    bool scale = false;
    std::uint64_t seed = 0;
    std::size_t min_samples_split = 2;
    std::size_t min_leaf = 1;
    double max_features = 0.333;
    std::string out;
};

int run_fit(const FitArgs& a) {
    const kerf::RawTable table = kerf::read_csv_file(a.data);
    auto [dataset, scaling] = kerf::make_dataset(table, a.response, a.scale);

    kerf::TreeParams params;
    params.kind = kerf::tree_kind_from_string(a.kind);
    params.level = a.level >= 0
                       ? a.level
                       : kerf::suggest_level(dataset.size(), dataset.dim(),
                                             kerf::LevelRule::experiment);
    params.breiman.min_samples_split = a.min_samples_split;
    params.breiman.min_leaf = a.min_leaf;
    params.breiman.max_features = a.max_features;

    const kerf::Forest forest = kerf::fit_forest(
        params, std::move(dataset), a.trees, a.bootstrap, kerf::RandomSource(a.seed));

    nlohmann::json j = kerf::forest_to_json(forest);
    std::vector<std::string> features;
    for (const auto& name : table.names)
        if (name != a.response) features.push_back(name);
    j["features"] = features;
    j["response"] = a.response;
    if (a.scale) {
        nlohmann::json cols = nlohmann::json::array();
        for (const auto& c : scaling.columns) cols.push_back({c.lo, c.hi});
        j["scaling"] = std::move(cols);
    }
    write_text_file(a.out, j.dump(1, '\t') + '\n');
    return kExitOk;
}

// --- predict -------------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string data;
    std::string mode = "kerf";
    std::optional<std::string> out;
};

// Query features in the model's training order.  When the model records
// feature names, columns are matched by name (extra columns are ignored);
// otherwise the file must hold exactly the trained columns in order.
std::vector<double> query_rows(const kerf::RawTable& table, const nlohmann::json& j,
                               int dim) {
    std::vector<std::size_t> cols;
    if (j.contains("features")) {
        const auto names = j.at("features").get<std::vector<std::string>>();
        if (names.size() != static_cast<std::size_t>(dim))
            throw kerf::DataError("model feature list does not match its dimension");
        for (const auto& name : names) cols.push_back(table.column(name));
    } else {
        if (table.cols() != static_cast<std::size_t>(dim))
            throw kerf::DataError("query file has " + std::to_string(table.cols()) +
                                  " columns but the model expects " +
                                  std::to_string(dim));
        for (std::size_t c = 0; c < table.cols(); ++c) cols.push_back(c);
    }
    std::vector<double> rows;
    rows.reserve(table.rows * cols.size());
    for (std::size_t r = 0; r < table.rows; ++r)
        for (const std::size_t c : cols) rows.push_back(table.at(r, c));
    return rows;
}

void apply_scaling(const nlohmann::json& j, std::vector<double>& rows, int dim) {
    if (!j.contains("scaling")) {
        for (const double v : rows)
            if (!(v >= 0.0 && v <= 1.0))
                throw kerf::DataError(
                    "query coordinates fall outside [0,1] and the model was fitted "
                    "without scaling");
        return;
    }
    kerf::ScalingParams params;
    for (const auto& c : j.at("scaling")) {
        if (!c.is_array() || c.size() != 2)
            throw kerf::DataError("malformed scaling entry in model file");
        params.columns.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (params.columns.size() != static_cast<std::size_t>(dim))
        throw kerf::DataError("scaling entries do not match model dimension");
    const std::size_t d = static_cast<std::size_t>(dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = params.forward(i % d, rows[i]);
}

int run_predict(const PredictArgs& a) {
    std::ifstream in(a.model, std::ios::binary);
    if (!in) throw kerf::DataError("cannot open '" + a.model + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw kerf::DataError(a.model + ": invalid JSON: " + e.what());
    }
    const kerf::Forest forest = kerf::forest_from_json(j);

    // An empty query file still gets a header; read_csv rejects header-only
    // input, so catch that case by parsing leniently here.
    kerf::RawTable table;
    {
        std::ifstream data_in(a.data);
        if (!data_in) throw kerf::DataError("cannot open '" + a.data + "'");
        try {
            table = kerf::read_csv(data_in);
        } catch (const kerf::DataError& e) {
            const std::string what = e.what();
            if (what.find("no data rows") == std::string::npos)
                throw kerf::DataError(a.data + ": " + what);
            table.rows = 0;
        }
    }

    std::vector<double> predictions;
    if (table.rows > 0) {
        std::vector<double> rows = query_rows(table, j, forest.dim());
        apply_scaling(j, rows, forest.dim());
        if (a.mode == "forest" || a.mode == "kerf") {
            const auto mode = a.mode == "forest" ? kerf::PredictMode::forest
                                                 : kerf::PredictMode::kerf;
            predictions = kerf::predict_rows(forest, rows, table.rows, mode);
        } else {  // kerf-infinite
            if (forest.params.kind != kerf::TreeKind::centred &&
                forest.params.kind != kerf::TreeKind::uniform)
                throw kerf::DataError(
                    "closed-form kernels exist only for centred and uniform "
                    "forests; a " +
                    to_string(forest.params.kind) +
                    " forest partitions data-dependently");
            kerf::AnalyticKernel kernel;
            kernel.family = forest.params.kind == kerf::TreeKind::centred
                                ? kerf::KernelFamily::centred
                                : kerf::KernelFamily::uniform;
            kernel.level = forest.params.level;
            const auto d = static_cast<std::size_t>(forest.dim());
            predictions.resize(table.rows);
            kerf::parallel_for(table.rows, [&](std::size_t i) {
                const std::span<const double> x{rows.data() + i * d, d};
                predictions[i] =
                    kerf::infinite_kerf_predict(*forest.training, x, kernel);
            });
        }
    }
    const std::vector<std::string> names{"prediction"};
    emit(a.out, csv_text(names, predictions, predictions.size()));
    return kExitOk;
}

// --- kernel-eval ----------------------------------------------------------------

struct KernelEvalArgs {
    std::string family = "centred";
    int k = 1;
    int d = 2;
    std::size_t grid = 64;
    std::string at;
    std::string strategy = "dp";
    std::optional<std::string> out;
};

// Sweep z over a grid in the first min(d,2) coordinates while the remaining
// coordinates stay pinned at the base point; one CSV row per grid node.
int run_kernel_eval(const KernelEvalArgs& a) {
    kerf::AnalyticKernel kernel;
    kernel.family = a.family == "centred" ? kerf::KernelFamily::centred
                                          : kerf::KernelFamily::uniform;
    kernel.level = a.k;
    kernel.strategy = a.strategy == "naive" ? kerf::KernelStrategy::naive_enumeration
                                            : kerf::KernelStrategy::dp_convolution;

    std::vector<double> base(static_cast<std::size_t>(a.d), 0.5);
    if (!a.at.empty()) base = parse_point(a.at, a.d);
    for (const double v : base)
        if (!(v >= 0.0 && v <= 1.0))
            throw kerf::DataError("base point coordinates must lie in [0,1]");

    const int sweep = std::min(a.d, 2);
    std::vector<std::string> names;
    for (int j = 0; j < sweep; ++j) names.push_back("z" + std::to_string(j + 1));
    names.emplace_back("value");

    const auto res = a.grid;
    const std::size_t rows = sweep == 2 ? res * res : res;
    std::vector<double> values(rows * names.size());
    kerf::parallel_for(rows, [&](std::size_t r) {
        std::vector<double> z = base;
        const std::size_t i = sweep == 2 ? r / res : r;
        z[0] = (static_cast<double>(i) + 0.5) / static_cast<double>(res);
        if (sweep == 2)
            z[1] = (static_cast<double>(r % res) + 0.5) / static_cast<double>(res);
        double* cell = values.data() + r * names.size();
        for (int j = 0; j < sweep; ++j) cell[j] = z[static_cast<std::size_t>(j)];
        cell[sweep] = kernel(base, z);
    });
    emit(a.out, csv_text(names, values, rows));
    return kExitOk;
}

// --- verify ---------------------------------------------------------------------

struct VerifyArgs {
    std::string suite = "all";
    std::uint64_t seed = 20260816;
    bool quick = false;
    std::optional<std::string> out;
};

int run_verify(const VerifyArgs& a) {
    kerf::VerifyOptions opt;
    opt.seed = a.seed;
    opt.quick = a.quick;
    const std::vector<kerf::BoundReport> checks = kerf::verify_suite(a.suite, opt);
    const nlohmann::json report = kerf::verify_report_json(a.suite, checks);
    emit(a.out, report.dump(1, '\t') + '\n');
    for (const auto& c : checks)
        if (!c.satisfied) return kExitVerify;
    return kExitOk;
}

// --- experiment -----------------------------------------------------------------

struct ExperimentArgs {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::string> csv;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    std::ifstream in(a.config);
    if (!in) throw kerf::DataError("cannot open '" + a.config + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw kerf::DataError(a.config + ": invalid JSON: " + e.what());
    }
    const kerf::ExperimentSpec spec = kerf::experiment_spec_from_json(j);
    const kerf::RunReport report = kerf::run_experiment(spec);
    emit(a.out, kerf::to_json(report).dump(1, '\t') + '\n');
    if (a.csv) {
        // Long-form table, one row per (estimator, repetition).
        std::ostringstream csv;
        csv << "estimator,repetition,risk\n";
        for (const auto& s : report.results)
            for (std::size_t rep = 0; rep < s.risks.size(); ++rep)
                csv << to_string(s.estimator) << ',' << rep << ','
                    << kerf::format_double(s.risks[rep]) << '\n';
        write_text_file(*a.csv, csv.str());
    }
    return kExitOk;
}

// --- convergence ------------------------------------------------------------------

struct ConvergenceArgs {
    int model = 2;
    std::size_t n = 100;
    int d = 10;
    std::string family = "centred";
    std::string tree_grid = "1,4,16,64,256,1000";
    int level = -1;
    std::size_t reps = 10;
    std::uint64_t seed = 1;
    std::optional<std::string> out;
    std::optional<std::string> csv;
};

int run_convergence(const ConvergenceArgs& a) {
    kerf::ConvergenceSpec spec;
    spec.model_id = a.model;
    spec.n = a.n;
    spec.d = a.d;
    spec.family = a.family == "centred" ? kerf::KernelFamily::centred
                                        : kerf::KernelFamily::uniform;
    spec.tree_grid.clear();
    {
        std::stringstream ss(a.tree_grid);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                const long long v = std::stoll(field);
                if (v <= 0) throw std::out_of_range("nonpositive");
                spec.tree_grid.push_back(static_cast<std::size_t>(v));
            } catch (const std::exception&) {
                throw kerf::DataError("bad tree-grid entry '" + field + "'");
            }
        }
    }
    if (a.level >= 0) spec.level = {.automatic = false, .level = a.level};
    spec.repetitions = a.reps;
    spec.seed = a.seed;

    const kerf::ConvergenceReport report = kerf::convergence_curve(spec);
    emit(a.out, kerf::to_json(report).dump(1, '\t') + '\n');
    if (a.csv) {
        // One row per tree-count; the trees=0 row is the closed-form
        // (infinite-forest) risk the curve converges to.
        std::ostringstream csv;
        csv << "trees,mean_risk\n";
        for (std::size_t g = 0; g < report.spec.tree_grid.size(); ++g)
            csv << report.spec.tree_grid[g] << ','
                << kerf::format_double(report.finite_risk_mean[g]) << '\n';
        csv << 0 << ',' << kerf::format_double(report.infinite_risk_mean) << '\n';
        write_text_file(*a.csv, csv.str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized-forest regression and its kernel methods"};
    app.require_subcommand(1);
    bool timings = false;
    app.add_flag("--timings", timings, "report wall-clock time to stderr");

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "train a forest on a CSV table");
    fit_cmd->fallthrough();
    fit_cmd->add_option("--data", fit.data, "training CSV (header row required)")
        ->required();
    fit_cmd->add_option("--response", fit.response, "response column name")
        ->required();
    fit_cmd->add_option("--kind", fit.kind, "tree kind")
        ->check(CLI::IsMember({"centred", "uniform", "median", "breiman"}))
        ->capture_default_str();
    fit_cmd->add_option("--trees", fit.trees, "number of trees")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fit_cmd->add_option("--level", fit.level,
                        "tree depth for centred/uniform/median (default: auto)")
        ->check(CLI::Range(0, 25));
    fit_cmd->add_flag("--bootstrap", fit.bootstrap, "resample the bag per tree");
    fit_cmd->add_flag("--scale", fit.scale,
                      "minmax-map features onto [0,1] and store the transform");
    fit_cmd->add_option("--seed", fit.seed, "rng seed")->capture_default_str();
    fit_cmd->add_option("--min-samples-split", fit.min_samples_split,
                        "smallest splittable node (breiman)")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40))
        ->capture_default_str();
    fit_cmd->add_option("--min-leaf", fit.min_leaf, "smallest leaf (breiman)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fit_cmd->add_option("--max-features", fit.max_features,
                        "fraction of dimensions searched per split (breiman)")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    fit_cmd->add_option("--out", fit.out, "model file to write")->required();

    PredictArgs predict;
    CLI::App* predict_cmd =
        app.add_subcommand("predict", "evaluate a fitted model on query points");
    predict_cmd->fallthrough();
    predict_cmd->add_option("--model", predict.model, "model file from fit")
        ->required();
    predict_cmd->add_option("--data", predict.data, "query CSV")->required();
    predict_cmd->add_option("--mode", predict.mode, "estimator form")
        ->check(CLI::IsMember({"forest", "kerf", "kerf-infinite"}))
        ->capture_default_str();
    predict_cmd->add_option("--out", predict.out,
                            "output CSV (default: stdout)");

    KernelEvalArgs keval;
    CLI::App* keval_cmd = app.add_subcommand(
        "kernel-eval", "tabulate a closed-form connection kernel on a grid");
    keval_cmd->fallthrough();
    keval_cmd->add_option("--family", keval.family, "kernel family")
        ->check(CLI::IsMember({"centred", "uniform"}))
        ->capture_default_str();
    keval_cmd->add_option("--k", keval.k, "tree depth (level)")
        ->check(CLI::Range(0, 128))
        ->capture_default_str();
    keval_cmd->add_option("--d", keval.d, "dimension")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
    keval_cmd->add_option("--grid", keval.grid, "grid resolution per axis")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    keval_cmd->add_option("--at", keval.at,
                          "base point, comma-separated (default: cube centre)");
    keval_cmd->add_option("--strategy", keval.strategy, "evaluation strategy")
        ->check(CLI::IsMember({"dp", "naive"}))
        ->capture_default_str();
    keval_cmd->add_option("--out", keval.out, "output CSV (default: stdout)");

    VerifyArgs verify;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify", "run the numerical checks of the analytic claims");
    verify_cmd->fallthrough();
    verify_cmd->add_option("--suite", verify.suite, "which checks to run")
        ->check(CLI::IsMember({"identities", "bounds", "convergence", "all"}))
        ->capture_default_str();
    verify_cmd->add_option("--seed", verify.seed, "rng seed for sampled checks")
        ->capture_default_str();
    verify_cmd->add_flag("--quick", verify.quick,
                         "smaller sample sizes (for smoke testing)");
    verify_cmd->add_option("--out", verify.out,
                           "JSON report file (default: stdout)");

    ExperimentArgs experiment;
    CLI::App* experiment_cmd = app.add_subcommand(
        "experiment", "benchmark estimators on the synthetic models");
    experiment_cmd->fallthrough();
    experiment_cmd->add_option("--config", experiment.config, "JSON spec file")
        ->required();
    experiment_cmd->add_option("--out", experiment.out,
                               "JSON report file (default: stdout)");
    experiment_cmd->add_option("--csv", experiment.csv,
                               "also write a long-form risk table");

    ConvergenceArgs convergence;
    CLI::App* convergence_cmd = app.add_subcommand(
        "convergence", "risk of the pooled estimate as trees are added");
    convergence_cmd->fallthrough();
    convergence_cmd->add_option("--model", convergence.model, "synthetic model id")
        ->check(CLI::Range(1, 8))
        ->capture_default_str();
    convergence_cmd->add_option("--n", convergence.n, "sample size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    convergence_cmd->add_option("--d", convergence.d, "dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    convergence_cmd->add_option("--family", convergence.family, "kernel family")
        ->check(CLI::IsMember({"centred", "uniform"}))
        ->capture_default_str();
    convergence_cmd
        ->add_option("--tree-grid", convergence.tree_grid,
                     "increasing comma-separated tree counts")
        ->capture_default_str();
    convergence_cmd
        ->add_option("--level", convergence.level, "tree depth (default: auto)")
        ->check(CLI::Range(0, 25));
    convergence_cmd->add_option("--reps", convergence.reps, "repetitions")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    convergence_cmd->add_option("--seed", convergence.seed, "rng seed")
        ->capture_default_str();
    convergence_cmd->add_option("--out", convergence.out,
                                "JSON report file (default: stdout)");
    convergence_cmd->add_option("--csv", convergence.csv,
                                "also write the risk curve as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFlag;
    }

    Timer timer;
    timer.enabled = timings;
    try {
        if (fit_cmd->parsed()) return run_fit(fit);
        if (predict_cmd->parsed()) return run_predict(predict);
        if (keval_cmd->parsed()) return run_kernel_eval(keval);
        if (verify_cmd->parsed()) return run_verify(verify);
        if (experiment_cmd->parsed()) return run_experiment_cmd(experiment);
        if (convergence_cmd->parsed()) return run_convergence(convergence);
    } catch (const kerf::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
