#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kerf/dataset.hpp"

namespace kerf {

// Closed-form connection kernels of the non-adaptive forests: the level-k
// probability, over the tree-building randomness, that two points end up in
// the same cell.  Both families decompose over dimensions: conditioned on
// how many of the k cuts each dimension receives (a multinomial with weight
// d^-k), connection factorises into independent per-dimension factors
//
//   K_k(x,z) = sum_{t_1+...+t_d = k}  k!/(t_1!...t_d!) d^-k  prod_j g_j(t_j),
//
// where g_j(t) is the probability that t cuts in dimension j never separate
// x_j from z_j.  centred: g_j(t) = 1{x_j and z_j share the level-t dyadic
// cell}.  uniform (one endpoint at the origin): g_j(t) = phi_t(x_j), the
// probability that t recursive uniform cuts all land above x_j.
//
// Two evaluation strategies are kept: naive_enumeration walks every
// composition (O(k^(d-1)) terms, the reference), dp_convolution convolves
// the per-dimension series g_j(t)/t! and reads off the degree-k coefficient
// in O(d k^2) — the difference between minutes and microseconds once d is
// in the hundreds.

enum class KernelStrategy { naive_enumeration, dp_convolution };
enum class KernelFamily { centred, uniform };

inline std::string to_string(KernelFamily f) {
    return f == KernelFamily::centred ? "centred" : "uniform";
}

// Per-dimension agreement horizon: the deepest dyadic level at which the two
// coordinates still share a cell.
inline constexpr int kFullAgreement = std::numeric_limits<int>::max();

namespace detail {

inline void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument(std::string(what) + " outside [0,1]: " +
                                    std::to_string(v));
}

inline void check_level(int k) {
    if (k < 0 || k > 128)
        throw std::invalid_argument("kernel level must lie in [0,128], got " +
                                    std::to_string(k));
}

inline const std::vector<double>& lfact_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(130);
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = std::lgamma(static_cast<double>(i) + 1.0);
        return t;
    }();
    return table;
}

inline double lfact(int n) { return lfact_table()[static_cast<std::size_t>(n)]; }

// Degree-k coefficient route: convolve the series g_j(t)/t!, rescaling by
// the running maximum so no intermediate value can overflow or vanish.
inline double combine_dp(std::span<const std::vector<double>> g, int k) {
    const std::size_t d = g.size();
    const auto width = static_cast<std::size_t>(k) + 1;
    std::vector<double> f(width), next(width);
    double inv_fact = 1.0;
    for (std::size_t t = 0; t < width; ++t) {
        if (t > 0) inv_fact /= static_cast<double>(t);
        f[t] = g[0][t] * inv_fact;
    }
    double log_scale = 0.0;
    for (std::size_t j = 1; j < d; ++j) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t r = 0; r < width; ++r) {
            if (f[r] == 0.0) continue;
            double a = 1.0;
            for (std::size_t t = 0; r + t < width; ++t) {
                if (t > 0) a /= static_cast<double>(t);
                next[r + t] += f[r] * g[j][t] * a;
            }
        }
        f.swap(next);
        const double peak = *std::max_element(f.begin(), f.end());
        if (peak == 0.0) return 0.0;
        for (auto& v : f) v /= peak;
        log_scale += std::log(peak);
    }
    if (f[static_cast<std::size_t>(k)] <= 0.0) return 0.0;
    const double log_k = lfact(k) - static_cast<double>(k) * std::log(static_cast<double>(d)) +
                         log_scale + std::log(f[static_cast<std::size_t>(k)]);
    return std::min(1.0, std::exp(log_k));
}

// Reference route: explicit sum over cut-count compositions.
inline double combine_naive(std::span<const std::vector<double>> g, int k) {
    const std::size_t d = g.size();
    const double base = lfact(k) - static_cast<double>(k) * std::log(static_cast<double>(d));
    double total = 0.0;
    // Depth-first over t_0..t_{d-1} summing to k.
    auto rec = [&](auto&& self, std::size_t j, int rem, double log_coef,
                   double prod) -> void {
        if (prod == 0.0) return;
        if (j + 1 == d) {
            const double gj = g[j][static_cast<std::size_t>(rem)];
            if (gj == 0.0) return;
            total += std::exp(log_coef - lfact(rem)) * prod * gj;
            return;
        }
        for (int t = 0; t <= rem; ++t)
            self(self, j + 1, rem - t, log_coef - lfact(t),
                 prod * g[j][static_cast<std::size_t>(t)]);
    };
    rec(rec, 0, k, base, 1.0);
    return std::min(1.0, total);
}

inline double combine(std::span<const std::vector<double>> g, int k,
                      KernelStrategy strategy) {
    bool saturated = true;
    for (const auto& gj : g) {
        for (const double v : gj)
            if (v != 1.0) {
                saturated = false;
                break;
            }
        if (!saturated) break;
    }
    if (saturated) return 1.0;   // every factor certain: connection is exact
    return strategy == KernelStrategy::dp_convolution ? combine_dp(g, k)
                                                      : combine_naive(g, k);
}

}  // namespace detail

// Level-t dyadic cell of x: cells are ]0,1/2^t], ]1/2^t,2/2^t], ... with 0
// folded into the first cell.  ldexp is an exact scaling, so the index is
// exact for every representable coordinate.
inline double dyadic_cell(double x, int t) {
    const double c = std::ceil(std::ldexp(x, t));
    return c < 1.0 ? 1.0 : c;
}

// Deepest level at which x and z share a dyadic cell, capped at 64 (by then
// the cells are narrower than one double ulp); equal coordinates agree at
// every level and report kFullAgreement.
inline int centred_threshold(double x, double z) {
    detail::check_unit(x, "coordinate");
    detail::check_unit(z, "coordinate");
    if (x == z) return kFullAgreement;
    for (int t = 1; t <= 64; ++t)
        if (dyadic_cell(x, t) != dyadic_cell(z, t)) return t - 1;
    return 64;
}

// Centred kernel from precomputed per-dimension agreement levels.
inline double centred_kernel_thresholds(std::span<const int> thresholds, int k,
                                        KernelStrategy strategy =
                                            KernelStrategy::dp_convolution) {
    detail::check_level(k);
    if (thresholds.empty())
        throw std::invalid_argument("kernel needs at least one dimension");
    std::vector<std::vector<double>> g(thresholds.size());
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
        g[j].assign(static_cast<std::size_t>(k) + 1, 0.0);
        const int cap = std::min(thresholds[j], k);
        for (int t = 0; t <= cap; ++t) g[j][static_cast<std::size_t>(t)] = 1.0;
    }
    return detail::combine(g, k, strategy);
}

// Probability that a level-k centred tree places x and z in the same cell.
inline double centred_kernel(std::span<const double> x, std::span<const double> z,
                             int k,
                             KernelStrategy strategy = KernelStrategy::dp_convolution) {
    if (x.size() != z.size() || x.empty())
        throw std::invalid_argument("centred kernel: point dimensions differ");
    std::vector<int> s(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        s[j] = centred_threshold(x[j], z[j]);
    return centred_kernel_thresholds(s, k, strategy);
}

// One-dimensional uniform factor phi_t(u): probability that t recursive
// uniform cuts of [0,1] never separate 0 from u.  Writing w = -ln u, this is
// the upper Poisson tail P(Poisson(w) >= t) = 1 - u sum_{j<t} w^j/j!; the
// tail form is summed directly since all its terms are positive.
inline double uniform_factor(double u, int t) {
    detail::check_unit(u, "distance");
    if (t <= 0 || u == 0.0) return 1.0;
    if (u == 1.0) return 0.0;
    const double w = -std::log(u);
    double term = std::exp(-w + static_cast<double>(t) * std::log(w) -
                           detail::lfact(t));
    double sum = term;
    for (int j = t + 1;; ++j) {
        term *= w / static_cast<double>(j);
        sum += term;
        if (static_cast<double>(j) > w && term < sum * 1e-17) break;
    }
    return std::min(sum, 1.0);
}

// Uniform kernel anchored at the origin: K_k(0, x) for x in [0,1]^d.
inline double uniform_kernel_origin(std::span<const double> x, int k,
                                    KernelStrategy strategy =
                                        KernelStrategy::dp_convolution) {
    detail::check_level(k);
    if (x.empty()) throw std::invalid_argument("kernel needs at least one dimension");
    std::vector<std::vector<double>> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        detail::check_unit(x[j], "coordinate");
        g[j].resize(static_cast<std::size_t>(k) + 1);
        for (int t = 0; t <= k; ++t)
            g[j][static_cast<std::size_t>(t)] = uniform_factor(x[j], t);
    }
    return detail::combine(g, k, strategy);
}

// Translation-invariant lift of the origin kernel: evaluate at the
// coordinatewise distance |x - z|.  This is the standard stand-in for the
// general uniform kernel, which has no simple closed form off the origin.
inline double uniform_kernel_lifted(std::span<const double> x,
                                    std::span<const double> z, int k,
                                    KernelStrategy strategy =
                                        KernelStrategy::dp_convolution) {
    if (x.size() != z.size() || x.empty())
        throw std::invalid_argument("uniform kernel: point dimensions differ");
    std::vector<double> u(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        detail::check_unit(x[j], "coordinate");
        detail::check_unit(z[j], "coordinate");
        u[j] = std::abs(x[j] - z[j]);
    }
    return uniform_kernel_origin(u, k, strategy);
}

// Exact one-dimensional uniform kernels at levels 1 and 2, both endpoints
// free.  With x < z:  K_1 = 1 - (z - x) and, conditioning on where the first
// cut lands (below x with the survivor cell (c,1], or above z with [0,c]),
// K_2 = 1 - (z - x) + (z - x) ln(z (1 - x)).  Both log factors are <= 1, so
// the kernel shrinks with the level as it must; the value is clamped to
// [0,1] against rounding at the edges.
inline double uniform_kernel_exact_1d(double x, double z, int k) {
    detail::check_unit(x, "coordinate");
    detail::check_unit(z, "coordinate");
    if (k != 1 && k != 2)
        throw std::invalid_argument("exact uniform kernel is available for levels 1 "
                                    "and 2 only");
    if (x == z) return 1.0;
    if (z < x) std::swap(x, z);
    const double gap = z - x;
    if (k == 1) return 1.0 - gap;
    const double v = 1.0 - gap + gap * std::log(z * (1.0 - x));
    return std::clamp(v, 0.0, 1.0);
}

// A closed-form kernel bundled with its parameters, as used by the
// infinite-forest estimator and the grid evaluator.
struct AnalyticKernel {
    KernelFamily family = KernelFamily::centred;
    int level = 0;
    KernelStrategy strategy = KernelStrategy::dp_convolution;

    double operator()(std::span<const double> x, std::span<const double> z) const {
        return family == KernelFamily::centred
                   ? centred_kernel(x, z, level, strategy)
                   : uniform_kernel_lifted(x, z, level, strategy);
    }
};

// Infinite-forest estimate at x: the kernel-weighted response mean over the
// training sample (0 when every weight vanishes).
inline double infinite_kerf_predict(const Dataset& data, std::span<const double> x,
                                    const AnalyticKernel& kernel) {
    if (x.size() != static_cast<std::size_t>(data.dim()))
        throw std::invalid_argument("query dimension does not match dataset");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double w = kernel(x, data.point(i));
        num += data.response(i) * w;
        den += w;
    }
    return den == 0.0 ? 0.0 : num / den;
}

}  // namespace kerf
