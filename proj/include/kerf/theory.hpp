#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kerf/forest.hpp"
#include "kerf/kernels.hpp"
#include "kerf/models.hpp"
#include "kerf/random.hpp"
#include "kerf/tree.hpp"

namespace kerf {

// Outcome of one numerical check: an observed quantity, the admissible
// interval it must fall in, and the slack granted for floating point and
// quadrature error.  Everything the claim needs is spelled out in `name`.
struct BoundReport {
    std::string name;
    double observed = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double tolerance = 0.0;     // fixed numerical slack
    double uncertainty = 0.0;   // estimated quadrature / Monte Carlo error
    bool satisfied = false;
};

namespace detail {

inline BoundReport make_report(std::string name, double observed, double lower,
                               double upper, double tolerance,
                               double uncertainty = 0.0) {
    BoundReport r;
    r.name = std::move(name);
    r.observed = observed;
    r.lower = lower;
    r.upper = upper;
    r.tolerance = tolerance;
    r.uncertainty = uncertainty;
    const double slack = tolerance + uncertainty;
    r.satisfied = observed >= lower - slack && observed <= upper + slack;
    return r;
}

// 0-based level-t dyadic index of x, t small enough for exact integers.
inline std::uint64_t dyadic_index(double x, int t) {
    return static_cast<std::uint64_t>(dyadic_cell(x, t)) - 1;
}

// Agreement level of two 0-based level-k indices: the deepest t <= k whose
// ancestors coincide.
inline int index_agreement(std::uint64_t a, std::uint64_t b, int k) {
    if (a == b) return k;
    return k - std::bit_width(a ^ b);
}

// Kernel values for every per-dimension agreement tuple in {0..k}^d,
// indexed by sum_j s_j (k+1)^j.
inline std::vector<double> threshold_kernel_table(int k, int d) {
    const auto radix = static_cast<std::size_t>(k) + 1;
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) {
        if (total > (std::size_t{1} << 24) / radix)
            throw std::invalid_argument("threshold table too large for this (k,d)");
        total *= radix;
    }
    std::vector<double> table(total);
    std::vector<int> tuple(static_cast<std::size_t>(d));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (int j = 0; j < d; ++j) {
            tuple[static_cast<std::size_t>(j)] = static_cast<int>(rest % radix);
            rest /= radix;
        }
        table[idx] = centred_kernel_thresholds(tuple, k);
    }
    return table;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Integral identities
// ---------------------------------------------------------------------------

// Exact integral of the centred kernel over z in [0,1]^d.  The kernel is
// constant on every level-k dyadic cell of z, so the integral is a finite
// sum of cell volumes; no quadrature is involved.  Must equal 2^-k.
inline double centred_kernel_integral(std::span<const double> x, int k) {
    const int d = static_cast<int>(x.size());
    if (d < 1) throw std::invalid_argument("integral needs at least one dimension");
    detail::check_level(k);
    if (k * d > 22)
        throw std::invalid_argument("cell enumeration needs k*d <= 22");

    const std::uint64_t cells = std::uint64_t{1} << k;
    std::vector<std::uint64_t> xi(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        detail::check_unit(x[static_cast<std::size_t>(j)], "coordinate");
        xi[static_cast<std::size_t>(j)] =
            detail::dyadic_index(x[static_cast<std::size_t>(j)], k);
    }
    const auto table = detail::threshold_kernel_table(k, d);
    const auto radix = static_cast<std::size_t>(k) + 1;

    double total = 0.0;
    auto walk = [&](auto&& self, int j, std::size_t tup) -> void {
        if (j == d) {
            total += table[tup];
            return;
        }
        for (std::uint64_t c = 0; c < cells; ++c) {
            const int s = detail::index_agreement(xi[static_cast<std::size_t>(j)], c, k);
            self(self, j + 1, tup * radix + static_cast<std::size_t>(s));
        }
    };
    walk(walk, 0, 0);
    return total * std::ldexp(1.0, -k * d);
}

inline BoundReport check_centred_integral(std::span<const double> x, int k) {
    const double target = std::ldexp(1.0, -k);
    const double obs = centred_kernel_integral(x, k);
    return detail::make_report("centred kernel integrates to 2^-k (k=" +
                                   std::to_string(k) + ", d=" +
                                   std::to_string(x.size()) + ")",
                               obs, target, target, 1e-12);
}

namespace detail {

// Composite midpoint of g over [0,1] split at the kink x; `panels` per side.
template <typename G>
double midpoint_split(double x, int panels, G&& g) {
    double total = 0.0;
    if (x > 0.0) {
        const double h = x / panels;
        for (int i = 0; i < panels; ++i)
            total += g((static_cast<double>(i) + 0.5) * h) * h;
    }
    if (x < 1.0) {
        const double h = (1.0 - x) / panels;
        for (int i = 0; i < panels; ++i)
            total += g(x + (static_cast<double>(i) + 0.5) * h) * h;
    }
    return total;
}

}  // namespace detail

// 1-d integral of the uniform kernel around x, with a Richardson error
// estimate from halving the panel width.
struct QuadratureValue {
    double value = 0.0;
    double uncertainty = 0.0;
};

inline QuadratureValue uniform_kernel_integral_1d(double x, int k, int panels = 256) {
    detail::check_unit(x, "coordinate");
    detail::check_level(k);
    auto g = [&](double z) { return uniform_factor(std::abs(z - x), k); };
    const double coarse = detail::midpoint_split(x, panels / 2, g);
    const double fine = detail::midpoint_split(x, panels, g);
    return {fine, std::abs(fine - coarse) / 3.0};
}

inline QuadratureValue uniform_kernel_moment_1d(double x, int k, int panels = 256) {
    detail::check_unit(x, "coordinate");
    detail::check_level(k);
    auto g = [&](double z) {
        return uniform_factor(std::abs(z - x), k) * std::abs(z - x);
    };
    const double coarse = detail::midpoint_split(x, panels / 2, g);
    const double fine = detail::midpoint_split(x, panels, g);
    return {fine, std::abs(fine - coarse) / 3.0};
}

// 2^-(k+1) <= integral of the uniform kernel around any x <= 2^-(k-1).
inline BoundReport check_uniform_integral(double x, int k, int panels = 256) {
    const auto q = uniform_kernel_integral_1d(x, k, panels);
    return detail::make_report(
        "uniform kernel mass within [2^-(k+1), 2^-(k-1)] (k=" + std::to_string(k) +
            ", x=" + std::to_string(x) + ")",
        q.value, std::ldexp(1.0, -(k + 1)), std::ldexp(1.0, -(k - 1)), 1e-9,
        q.uncertainty);
}

// First distance moment of the uniform kernel <= (2/3)^(k+1) of its mass.
inline BoundReport check_uniform_moment(double x, int k, int panels = 256) {
    const auto mass = uniform_kernel_integral_1d(x, k, panels);
    const auto moment = uniform_kernel_moment_1d(x, k, panels);
    const double cap = std::pow(2.0 / 3.0, k + 1) * mass.value;
    return detail::make_report(
        "uniform kernel distance moment within (2/3)^(k+1) of its mass (k=" +
            std::to_string(k) + ", x=" + std::to_string(x) + ")",
        moment.value, 0.0, cap, 1e-9,
        moment.uncertainty + std::pow(2.0 / 3.0, k + 1) * mass.uncertainty);
}

// ---------------------------------------------------------------------------
// Bias of the kernel smoothers
// ---------------------------------------------------------------------------

// Test function with its Lipschitz constant in the sum-of-coordinates sense:
// |f(x) - f(z)| <= L * sum_j |x_j - z_j|.
struct LipschitzFunction {
    std::string name;
    double L = 1.0;
    std::function<double(std::span<const double>)> f;
};

// Stock functions used by the bias checks: smooth, oscillating, and kinked.
inline std::vector<LipschitzFunction> lipschitz_suite(int d) {
    const double dd = static_cast<double>(d);
    std::vector<LipschitzFunction> fs;
    fs.push_back({"coordinate-mean", 1.0 / dd,
                  [dd](std::span<const double> x) {
                      double s = 0.0;
                      for (const double v : x) s += v;
                      return s / dd;
                  }});
    fs.push_back({"sine-mean", std::numbers::pi / dd,
                  [dd](std::span<const double> x) {
                      double s = 0.0;
                      for (const double v : x) s += std::sin(std::numbers::pi * v);
                      return s / dd;
                  }});
    fs.push_back({"first-coordinate-kink", 1.0,
                  [](std::span<const double> x) {
                      return std::abs(x[0] - 0.37);
                  }});
    return fs;
}

struct GapScan {
    double sup_gap = 0.0;       // largest |smoothed f - f| seen on the grid
    double uncertainty = 0.0;   // quadrature error estimate on that gap
};

// Sup over a res^d interior grid of |int K(x,z) f(z) dz / int K(x,z) dz
// - f(x)| for the centred kernel.  The kernel integrals are exact cell
// sums; only the per-cell integral of f is quadrature (midpoint, subdiv
// and 2*subdiv points per axis for the error estimate).
inline std::vector<GapScan> centred_bias_scan(
    std::span<const LipschitzFunction> fs, int k, int d, int res = 50,
    int subdiv = 3) {
    detail::check_level(k);
    if (d < 1 || k < 0 || res < 1 || subdiv < 1)
        throw std::invalid_argument("centred_bias_scan: bad arguments");
    if (k * d > 16)
        throw std::invalid_argument("centred_bias_scan needs k*d <= 16");
    const std::size_t per_dim = std::size_t{1} << k;
    std::size_t cells = 1;
    for (int j = 0; j < d; ++j) cells *= per_dim;
    const std::size_t nf = fs.size();

    // Per-cell integrals of every f at two midpoint resolutions.
    std::vector<std::vector<double>> F(nf, std::vector<double>(cells, 0.0)),
        F2(nf, std::vector<double>(cells, 0.0));
    const double w = std::ldexp(1.0, -k);
    std::vector<double> z(static_cast<std::size_t>(d));
    std::vector<std::uint64_t> c(static_cast<std::size_t>(d), 0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::size_t rest = cell;
        for (int j = d - 1; j >= 0; --j) {   // match walk order below
            c[static_cast<std::size_t>(j)] = rest % per_dim;
            rest /= per_dim;
        }
        for (const int m : {subdiv, 2 * subdiv}) {
            auto& target = (m == subdiv) ? F : F2;
            const double step = w / m;
            std::size_t subtotal = 1;
            for (int j = 0; j < d; ++j) subtotal *= static_cast<std::size_t>(m);
            const double vol = std::pow(step, d);
            for (std::size_t s = 0; s < subtotal; ++s) {
                std::size_t q = s;
                for (int j = 0; j < d; ++j) {
                    const auto sub = q % static_cast<std::size_t>(m);
                    q /= static_cast<std::size_t>(m);
                    z[static_cast<std::size_t>(j)] =
                        (static_cast<double>(c[static_cast<std::size_t>(j)]) +
                         (static_cast<double>(sub) + 0.5) / m) *
                        w;
                }
                for (std::size_t fi = 0; fi < nf; ++fi)
                    target[fi][cell] += fs[fi].f(z) * vol;
            }
        }
    }

    const auto table = detail::threshold_kernel_table(k, d);
    const auto radix = static_cast<std::size_t>(k) + 1;

    std::vector<GapScan> out(nf);
    std::vector<std::uint64_t> xi(static_cast<std::size_t>(d));
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<double> num(nf), num2(nf);
    std::size_t queries = 1;
    for (int j = 0; j < d; ++j) queries *= static_cast<std::size_t>(res);
    for (std::size_t qi = 0; qi < queries; ++qi) {
        std::size_t rest = qi;
        for (int j = 0; j < d; ++j) {
            const auto g = rest % static_cast<std::size_t>(res);
            rest /= static_cast<std::size_t>(res);
            x[static_cast<std::size_t>(j)] = (static_cast<double>(g) + 0.5) / res;
            xi[static_cast<std::size_t>(j)] =
                detail::dyadic_index(x[static_cast<std::size_t>(j)], k);
        }
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(num2.begin(), num2.end(), 0.0);
        double den = 0.0;
        auto walk = [&](auto&& self, int j, std::size_t tup, std::size_t base) -> void {
            if (j == d) {
                const double K = table[tup];
                if (K == 0.0) return;
                den += K;
                for (std::size_t fi = 0; fi < nf; ++fi) {
                    num[fi] += K * F[fi][base];
                    num2[fi] += K * F2[fi][base];
                }
                return;
            }
            for (std::uint64_t cc = 0; cc < per_dim; ++cc) {
                const int s =
                    detail::index_agreement(xi[static_cast<std::size_t>(j)], cc, k);
                self(self, j + 1, tup * radix + static_cast<std::size_t>(s),
                     base * per_dim + cc);
            }
        };
        walk(walk, 0, 0, 0);
        const double vol_den = den * std::ldexp(1.0, -k * d);
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const double fx = fs[fi].f(x);
            const double gap = std::abs(num[fi] / vol_den - fx);
            const double gap2 = std::abs(num2[fi] / vol_den - fx);
            out[fi].sup_gap = std::max(out[fi].sup_gap, gap2);
            out[fi].uncertainty =
                std::max(out[fi].uncertainty, std::abs(gap2 - gap) / 3.0);
        }
    }
    return out;
}

// Same scan for the translation-invariant uniform kernel.  Both integrals
// are midpoint quadrature with the axis split at the query coordinate;
// `panels` midpoints per side at the fine level, half that for the error
// estimate.
inline std::vector<GapScan> uniform_bias_scan(
    std::span<const LipschitzFunction> fs, int k, int d, int res = 50,
    int panels = 32) {
    detail::check_level(k);
    if (d < 1 || res < 1 || panels < 4)
        throw std::invalid_argument("uniform_bias_scan: bad arguments");
    const std::size_t nf = fs.size();
    const auto du = static_cast<std::size_t>(d);
    const auto width = static_cast<std::size_t>(k) + 1;

    // k! / d^k, applied once per kernel evaluation.
    double kern_scale = 1.0;
    for (int t = 2; t <= k; ++t) kern_scale *= t;
    kern_scale *= std::pow(1.0 / static_cast<double>(d), k);

    std::vector<GapScan> out(nf);
    std::vector<double> x(du);

    struct Node {
        double z;
        double weight;
        std::vector<double> series;   // phi_t(|z - x_j|)/t!, t = 0..k
    };
    std::vector<std::vector<Node>> dims(du);
    std::vector<double> z(du), num(nf), gap_at(nf), gap_coarse(nf);

    std::size_t queries = 1;
    for (int j = 0; j < d; ++j) queries *= static_cast<std::size_t>(res);
    for (std::size_t qi = 0; qi < queries; ++qi) {
        std::size_t rest = qi;
        for (std::size_t j = 0; j < du; ++j) {
            const auto g = rest % static_cast<std::size_t>(res);
            rest /= static_cast<std::size_t>(res);
            x[j] = (static_cast<double>(g) + 0.5) / res;
        }

        auto run_level = [&](int P, std::span<double> gaps) {
            for (std::size_t j = 0; j < du; ++j) {
                auto& nodes = dims[j];
                nodes.clear();
                auto push_side = [&](double lo, double hi) {
                    const double h = (hi - lo) / P;
                    for (int i = 0; i < P; ++i) {
                        Node nd;
                        nd.z = lo + (static_cast<double>(i) + 0.5) * h;
                        nd.weight = h;
                        nd.series.resize(width);
                        double inv_fact = 1.0;
                        for (std::size_t t = 0; t < width; ++t) {
                            if (t > 0) inv_fact /= static_cast<double>(t);
                            nd.series[t] =
                                uniform_factor(std::abs(nd.z - x[j]),
                                               static_cast<int>(t)) *
                                inv_fact;
                        }
                        nodes.push_back(std::move(nd));
                    }
                };
                if (x[j] > 0.0) push_side(0.0, x[j]);
                if (x[j] < 1.0) push_side(x[j], 1.0);
            }
            std::fill(num.begin(), num.end(), 0.0);
            double den = 0.0;
            std::vector<double> series(width);
            auto walk = [&](auto&& self, std::size_t j,
                            std::span<const double> S, double W) -> void {
                if (j + 1 == du) {
                    for (const auto& nd : dims[j]) {
                        double coef = 0.0;
                        for (std::size_t t = 0; t < width; ++t)
                            coef += S[t] * nd.series[width - 1 - t];
                        const double K = kern_scale * coef;
                        if (K == 0.0) continue;
                        const double w = W * nd.weight;
                        z[j] = nd.z;
                        den += w * K;
                        for (std::size_t fi = 0; fi < nf; ++fi)
                            num[fi] += w * K * fs[fi].f(z);
                    }
                    return;
                }
                std::vector<double> conv(width);
                for (const auto& nd : dims[j]) {
                    std::fill(conv.begin(), conv.end(), 0.0);
                    for (std::size_t r = 0; r < width; ++r) {
                        if (S[r] == 0.0) continue;
                        for (std::size_t t = 0; r + t < width; ++t)
                            conv[r + t] += S[r] * nd.series[t];
                    }
                    z[j] = nd.z;
                    self(self, j + 1, conv, W * nd.weight);
                }
            };
            std::fill(series.begin(), series.end(), 0.0);
            series[0] = 1.0;
            walk(walk, 0, series, 1.0);
            for (std::size_t fi = 0; fi < nf; ++fi)
                gaps[fi] = std::abs(num[fi] / den - fs[fi].f(x));
        };

        run_level(panels / 2, gap_coarse);
        run_level(panels, gap_at);
        for (std::size_t fi = 0; fi < nf; ++fi) {
            out[fi].sup_gap = std::max(out[fi].sup_gap, gap_at[fi]);
            out[fi].uncertainty = std::max(
                out[fi].uncertainty, std::abs(gap_at[fi] - gap_coarse[fi]) / 3.0);
        }
    }
    return out;
}

// sup-gap of the centred smoother <= L d (1 - 1/(2d))^k.
inline std::vector<BoundReport> check_bias_centred(int k, int d, int res = 50,
                                                   int subdiv = 3) {
    const auto fs = lipschitz_suite(d);
    const auto scans = centred_bias_scan(fs, k, d, res, subdiv);
    std::vector<BoundReport> out;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const double cap = fs[i].L * d * std::pow(1.0 - 0.5 / d, k);
        out.push_back(detail::make_report(
            "centred smoother bias within L*d*(1-1/(2d))^k (f=" + fs[i].name +
                ", k=" + std::to_string(k) + ", d=" + std::to_string(d) + ")",
            scans[i].sup_gap, 0.0, cap, 1e-9, scans[i].uncertainty));
    }
    return out;
}

// sup-gap of the uniform smoother <= L d 2^(2d+1)/3 (1 - 1/(3d))^k.
inline std::vector<BoundReport> check_bias_uniform(int k, int d, int res = 50,
                                                   int panels = 32) {
    const auto fs = lipschitz_suite(d);
    const auto scans = uniform_bias_scan(fs, k, d, res, panels);
    std::vector<BoundReport> out;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const double cap = fs[i].L * d * std::ldexp(1.0, 2 * d + 1) / 3.0 *
                           std::pow(1.0 - 1.0 / (3.0 * d), k);
        out.push_back(detail::make_report(
            "uniform smoother bias within L*d*2^(2d+1)/3*(1-1/(3d))^k (f=" +
                fs[i].name + ", k=" + std::to_string(k) + ", d=" +
                std::to_string(d) + ")",
            scans[i].sup_gap, 0.0, cap, 1e-9, scans[i].uncertainty));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forest-level checks
// ---------------------------------------------------------------------------

// Empirical connection frequency of an M-tree forest against the analytic
// kernel, sup over random point pairs; 4/sqrt(M) covers 8 standard
// deviations of a Bernoulli frequency.
inline BoundReport check_connection_convergence(KernelFamily family, int d, int k,
                                                std::size_t M, std::size_t pairs,
                                                RandomSource rng) {
    // Tree shapes ignore the data for these families; two dummy rows suffice.
    std::vector<double> dummy(static_cast<std::size_t>(2 * d), 0.25);
    for (std::size_t j = 0; j < static_cast<std::size_t>(d); ++j)
        dummy[static_cast<std::size_t>(d) + j] = 0.75;
    Dataset data(std::move(dummy), {0.0, 1.0}, d);

    TreeParams params;
    params.kind = family == KernelFamily::centred ? TreeKind::centred
                                                  : TreeKind::uniform;
    params.level = k;
    Forest forest = fit_forest(params, std::move(data), M, false, rng.split(0));

    RandomSource pts = rng.split(1);
    double worst = 0.0;
    std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < pairs; ++p) {
        for (auto& v : a) v = pts.next_double();
        for (auto& v : b) v = pts.next_double();
        double analytic;
        if (family == KernelFamily::centred) {
            analytic = centred_kernel(a, b, k);
        } else {
            // The closed form is anchored at the origin, where it is exact.
            std::fill(a.begin(), a.end(), 0.0);
            analytic = uniform_kernel_origin(b, k);
        }
        const double emp = empirical_connection(forest, a, b);
        worst = std::max(worst, std::abs(emp - analytic));
    }
    return detail::make_report(
        "empirical connection of " + std::to_string(M) + " " +
            to_string(params.kind) + " trees matches the analytic kernel (d=" +
            std::to_string(d) + ", k=" + std::to_string(k) + ", " +
            std::to_string(pairs) + " pairs)",
        worst, 0.0, 4.0 / std::sqrt(static_cast<double>(M)), 0.0);
}

// The pooled estimate and its kernel form are the same number.
inline BoundReport check_two_path_agreement(const Forest& forest,
                                            std::size_t queries,
                                            RandomSource rng) {
    double worst = 0.0;
    std::vector<double> x(static_cast<std::size_t>(forest.dim()));
    for (std::size_t q = 0; q < queries; ++q) {
        for (auto& v : x) v = rng.next_double();
        worst = std::max(worst, std::abs(kerf_predict(forest, x) -
                                         kerf_predict_via_kernel(forest, x)));
    }
    return detail::make_report(
        "pooled estimate equals its kernel form (" + to_string(forest.params.kind) +
            ", M=" + std::to_string(forest.tree_count()) +
            (forest.bootstrap ? ", resampled" : "") + ", " +
            std::to_string(queries) + " queries)",
        worst, 0.0, 0.0, 1e-12);
}

// Forest-vs-pooled ratio bound at random queries.  Returns one report for
// the bound itself and, when every leaf holds exactly one point, one for the
// implied equality of the two estimates.
inline std::vector<BoundReport> check_proximity_bound(const Forest& forest,
                                                      std::size_t queries,
                                                      RandomSource rng) {
    double worst_excess = 0.0;     // gap minus bound, should stay <= 0
    double worst_gap = 0.0;
    double worst_bound = 0.0;
    bool always_singleton = true;
    std::vector<double> x(static_cast<std::size_t>(forest.dim()));
    for (std::size_t q = 0; q < queries; ++q) {
        for (auto& v : x) v = rng.next_double();
        const ProximityReport r = proximity_report(forest, x);
        if (!r.bound_defined || !r.responses_nonnegative)
            throw std::logic_error("proximity check needs occupied leaves and "
                                   "nonnegative responses");
        worst_excess = std::max(worst_excess, r.observed_gap - r.bound);
        worst_gap = std::max(worst_gap, r.observed_gap);
        worst_bound = std::max(worst_bound, r.bound);
        always_singleton = always_singleton && r.min_count == 1 && r.max_count == 1;
    }
    std::vector<BoundReport> out;
    out.push_back(detail::make_report(
        "forest/pooled ratio gap within (b-a)/a at every query (max bound " +
            std::to_string(worst_bound) + ")",
        worst_excess, -std::numeric_limits<double>::infinity(), 0.0, 1e-12));
    if (always_singleton)
        out.push_back(detail::make_report(
            "single-point leaves force the two estimates to coincide", worst_gap,
            0.0, 0.0, 1e-12));
    return out;
}

// ---------------------------------------------------------------------------
// Convergence behaviour
// ---------------------------------------------------------------------------

// Growing the forest moves the pooled estimate towards the closed-form
// infinite-forest estimate: per repetition, the M-tree risk must sit closer
// to the infinite-forest risk than the single-tree risk does.  Reports the
// number of repetitions where that holds.
struct ForestLimitReport {
    std::vector<double> risk_single;     // per repetition
    std::vector<double> risk_many;
    std::vector<double> risk_infinite;
    int successes = 0;
    BoundReport report;
};

inline ForestLimitReport check_forest_to_infinite(
    int model_id, std::size_t n, int d, int k, std::size_t many_trees,
    std::size_t test_n, int reps, int min_successes, RandomSource rng) {
    ForestLimitReport out;
    const AnalyticKernel kernel{KernelFamily::centred, k,
                                KernelStrategy::dp_convolution};
    TreeParams params{TreeKind::centred, k, {}};
    for (int r = 0; r < reps; ++r) {
        RandomSource src = rng.split(static_cast<std::uint64_t>(r));
        Dataset train = generate(synthetic_model(model_id, n, d), src.split(0));
        Dataset test = generate(synthetic_model(model_id, test_n, d), src.split(1));

        // Tree j derives from base.split(j) in both forests, so the 1-tree
        // forest is literally the first tree of the large one.
        Forest one = fit_forest(params, train, 1, false, src.split(2));
        Forest many = fit_forest(params, std::move(train), many_trees, false,
                                 src.split(2));

        std::vector<double> p1(test.size()), pm(test.size()), pinf(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
            p1[i] = kerf_predict(one, test.point(i));
            pm[i] = kerf_predict(many, test.point(i));
            pinf[i] = infinite_kerf_predict(*many.training, test.point(i), kernel);
        }
        const double r1 = empirical_risk(p1, test.responses());
        const double rm = empirical_risk(pm, test.responses());
        const double ri = empirical_risk(pinf, test.responses());
        out.risk_single.push_back(r1);
        out.risk_many.push_back(rm);
        out.risk_infinite.push_back(ri);
        if (std::abs(rm - ri) < std::abs(r1 - ri)) ++out.successes;
    }
    out.report = detail::make_report(
        "pooled risk approaches the infinite-forest risk as trees grow 1 -> " +
            std::to_string(many_trees) + " (model " + std::to_string(model_id) +
            ", n=" + std::to_string(n) + ", d=" + std::to_string(d) + ", k=" +
            std::to_string(k) + ", " + std::to_string(reps) + " repetitions)",
        static_cast<double>(out.successes), static_cast<double>(min_successes),
        static_cast<double>(reps), 0.0);
    return out;
}

// Level grown by the rate policy must pay off: the pointwise squared error
// of the infinite-forest estimate at a fixed interior query should drop when
// the sample grows by a factor 32.
struct RateTrendReport {
    std::vector<std::size_t> sizes;
    std::vector<std::vector<double>> risks;   // [rep][size index]
    int successes = 0;
    BoundReport report;
};

inline RateTrendReport check_rate_trend(KernelFamily family, int d,
                                        std::span<const std::size_t> sizes,
                                        int reps, int trials, double sigma,
                                        int min_successes, RandomSource rng) {
    if (sizes.size() < 2) throw std::invalid_argument("rate trend needs two sizes");
    RateTrendReport out;
    out.sizes.assign(sizes.begin(), sizes.end());
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> query(du);
    for (std::size_t j = 0; j < du; ++j) query[j] = j % 2 == 0 ? 0.3 : 0.7;
    auto f = [](std::span<const double> x) {
        double s = 0.0;
        for (const double v : x) s += std::sin(std::numbers::pi * v);
        return s / static_cast<double>(x.size());
    };
    const double truth = f(query);
    const LevelRule rule = family == KernelFamily::centred
                               ? LevelRule::centred_rate
                               : LevelRule::uniform_rate;
    for (int r = 0; r < reps; ++r) {
        RandomSource rep_src = rng.split(static_cast<std::uint64_t>(r));
        std::vector<double> rep_risks;
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            const std::size_t n = sizes[si];
            const int k = suggest_level(n, d, rule);
            const AnalyticKernel kernel{family, k, KernelStrategy::dp_convolution};
            RandomSource size_src = rep_src.split(si);
            double acc = 0.0;
            for (int t = 0; t < trials; ++t) {
                RandomSource ds = size_src.split(static_cast<std::uint64_t>(t));
                std::vector<double> xs(n * du);
                std::vector<double> ys(n);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < du; ++j)
                        xs[i * du + j] = ds.next_double();
                    ys[i] = f(std::span<const double>{xs.data() + i * du, du}) +
                            ds.normal(0.0, sigma);
                }
                const Dataset data(std::move(xs), std::move(ys), d);
                const double pred = infinite_kerf_predict(data, query, kernel);
                acc += (pred - truth) * (pred - truth);
            }
            rep_risks.push_back(acc / trials);
        }
        if (rep_risks.back() < rep_risks.front()) ++out.successes;
        out.risks.push_back(std::move(rep_risks));
    }
    out.report = detail::make_report(
        "pointwise risk of the " + to_string(family) +
            " infinite forest falls from n=" + std::to_string(sizes.front()) +
            " to n=" + std::to_string(sizes.back()) + " (d=" + std::to_string(d) +
            ", sigma=" + std::to_string(sigma) + ", " + std::to_string(reps) +
            " repetitions)",
        static_cast<double>(out.successes), static_cast<double>(min_successes),
        static_cast<double>(reps), 0.0);
    return out;
}

// ---------------------------------------------------------------------------
// Bundled verification suites
// ---------------------------------------------------------------------------

struct VerifyOptions {
    std::uint64_t seed = 20260816;
    bool quick = false;   // trims grids and tree counts for smoke runs
};

// Closed-form facts: integral identities, exact special cases, and agreement
// of the two kernel evaluation strategies.
inline std::vector<BoundReport> verify_identities(const VerifyOptions& opt = {}) {
    std::vector<BoundReport> out;
    RandomSource rng(opt.seed, 101);

    // Centred kernel mass is exactly 2^-k in any dimension.
    const int xs_per_combo = opt.quick ? 3 : 10;
    for (int d = 1; d <= 3; ++d) {
        for (int k = 0; k <= (opt.quick ? 6 : 10); ++k) {
            if (k * d > 12) continue;
            std::vector<double> x(static_cast<std::size_t>(d));
            for (int i = 0; i < xs_per_combo; ++i) {
                for (auto& v : x) v = rng.next_double();
                out.push_back(check_centred_integral(x, k));
            }
        }
    }

    // Uniform kernel mass and first moment, scanned over anchor positions.
    for (int k = 1; k <= (opt.quick ? 4 : 8); ++k) {
        for (int i = 0; i <= 10; ++i) {
            const double x = static_cast<double>(i) / 10.0;
            out.push_back(check_uniform_integral(x, k));
            out.push_back(check_uniform_moment(x, k));
        }
    }

    // Exact 1-d uniform forms against the multinomial route.
    {
        double worst1 = 0.0, worst2 = 0.0;
        const int grid = opt.quick ? 101 : 1001;
        for (int i = 0; i < grid; ++i) {
            const double z = static_cast<double>(i) / (grid - 1);
            const double g1 = uniform_kernel_origin(std::span<const double>{&z, 1}, 1);
            worst1 = std::max(worst1, std::abs(g1 - uniform_kernel_exact_1d(0.0, z, 1)));
            const double g2 = uniform_kernel_origin(std::span<const double>{&z, 1}, 2);
            worst2 = std::max(worst2, std::abs(g2 - uniform_kernel_exact_1d(0.0, z, 2)));
        }
        out.push_back(detail::make_report(
            "origin-anchored uniform kernel equals 1-z at level 1", worst1, 0.0,
            0.0, 1e-12));
        out.push_back(detail::make_report(
            "origin-anchored uniform kernel equals its level-2 closed form",
            worst2, 0.0, 0.0, 1e-12));
    }

    // The two evaluation strategies are the same function.
    {
        double worst = 0.0;
        RandomSource pts = rng.split(7);
        for (int d = 1; d <= 4; ++d) {
            std::vector<double> a(static_cast<std::size_t>(d)),
                b(static_cast<std::size_t>(d));
            for (int k = 0; k <= (opt.quick ? 5 : 8); ++k) {
                for (int rep = 0; rep < (opt.quick ? 5 : 20); ++rep) {
                    for (auto& v : a) v = pts.next_double();
                    for (auto& v : b) v = pts.next_double();
                    worst = std::max(
                        worst,
                        std::abs(centred_kernel(a, b, k, KernelStrategy::dp_convolution) -
                                 centred_kernel(a, b, k, KernelStrategy::naive_enumeration)));
                    worst = std::max(
                        worst,
                        std::abs(uniform_kernel_lifted(a, b, k,
                                                       KernelStrategy::dp_convolution) -
                                 uniform_kernel_lifted(a, b, k,
                                                       KernelStrategy::naive_enumeration)));
                }
            }
        }
        out.push_back(detail::make_report(
            "convolution and enumeration kernel strategies agree (d<=4)", worst,
            0.0, 0.0, 1e-10));
    }
    return out;
}

// Analytic upper bounds: smoother bias for both families, and the
// forest-vs-pooled proximity bound on grown forests.
inline std::vector<BoundReport> verify_bounds(const VerifyOptions& opt = {}) {
    std::vector<BoundReport> out;
    const int res = opt.quick ? 20 : 50;
    const int kmax = opt.quick ? 3 : 6;
    for (int d = 1; d <= 2; ++d) {
        for (int k = 1; k <= kmax; ++k) {
            auto c = check_bias_centred(k, d, res, 3);
            out.insert(out.end(), c.begin(), c.end());
            auto u = check_bias_uniform(k, d, res, opt.quick ? 16 : 32);
            out.insert(out.end(), u.begin(), u.end());
        }
    }

    // Proximity bound on CART forests over a nonnegative-response sample.
    RandomSource rng(opt.seed, 303);
    Dataset data = generate(synthetic_model(1, opt.quick ? 80 : 150, 8), rng.split(0));
    const std::size_t M = opt.quick ? 20 : 50;
    const std::size_t queries = opt.quick ? 8 : 20;
    {
        TreeParams grown{TreeKind::breiman, 0, BreimanParams{2, 1, 0.333}};
        Forest f = fit_forest(grown, data, M, false, rng.split(1));
        auto reports = check_proximity_bound(f, queries, rng.split(2));
        out.insert(out.end(), reports.begin(), reports.end());
    }
    {
        TreeParams capped{TreeKind::breiman, 0, BreimanParams{6, 1, 0.333}};
        Forest f = fit_forest(capped, std::move(data), M, false, rng.split(3));
        auto reports = check_proximity_bound(f, queries, rng.split(4));
        out.insert(out.end(), reports.begin(), reports.end());
    }
    return out;
}

// Limit behaviour: empirical connections, the two prediction paths, forest
// towards infinite forest, and the rate-policy trend.
inline std::vector<BoundReport> verify_convergence(const VerifyOptions& opt = {}) {
    std::vector<BoundReport> out;
    RandomSource rng(opt.seed, 505);
    const std::size_t M = opt.quick ? 2000 : 10000;
    out.push_back(check_connection_convergence(KernelFamily::centred, 3, 5, M,
                                               opt.quick ? 20 : 50, rng.split(0)));
    out.push_back(check_connection_convergence(KernelFamily::uniform, 2, 4, M,
                                               opt.quick ? 20 : 50, rng.split(1)));

    Dataset data = generate(synthetic_model(1, opt.quick ? 60 : 120, 5), rng.split(2));
    const int k = suggest_level(data.size(), data.dim(), LevelRule::experiment);
    const std::size_t queries = opt.quick ? 25 : 100;
    int idx = 0;
    for (const TreeKind kind : {TreeKind::centred, TreeKind::uniform,
                                TreeKind::median, TreeKind::breiman}) {
        for (const bool bootstrap : {false, true}) {
            TreeParams params{kind, kind == TreeKind::breiman ? 0 : k, {}};
            Forest f = fit_forest(params, data, opt.quick ? 10 : 30, bootstrap,
                                  rng.split(10 + idx));
            out.push_back(check_two_path_agreement(f, queries, rng.split(40 + idx)));
            ++idx;
        }
    }

    out.push_back(check_forest_to_infinite(2, 100, 10, 6, opt.quick ? 100 : 1000,
                                           50, opt.quick ? 4 : 10,
                                           opt.quick ? 3 : 9, rng.split(60))
                      .report);
    const std::size_t sizes[] = {128, 4096};
    out.push_back(check_rate_trend(KernelFamily::centred, 2, sizes,
                                   opt.quick ? 4 : 10, opt.quick ? 8 : 20, 0.1,
                                   opt.quick ? 3 : 9, rng.split(61))
                      .report);
    return out;
}

inline std::vector<BoundReport> verify_suite(std::string_view which,
                                             const VerifyOptions& opt = {}) {
    std::vector<BoundReport> out;
    const bool all = which == "all";
    if (all || which == "identities") {
        auto r = verify_identities(opt);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (all || which == "bounds") {
        auto r = verify_bounds(opt);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (all || which == "convergence") {
        auto r = verify_convergence(opt);
        out.insert(out.end(), r.begin(), r.end());
    }
    if (out.empty())
        throw std::invalid_argument(
            "unknown verification suite '" + std::string(which) +
            "' (expected identities, bounds, convergence, or all)");
    return out;
}

}  // namespace kerf
