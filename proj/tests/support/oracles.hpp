#pragma once

// Deliberately naive second implementations used as test oracles.  Everything
// here favours being obviously correct over being fast, and none of it calls
// into the library paths under test (only shared plumbing like RandomSource).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kerf/random.hpp"

namespace oracles {

// Follow the cell containing x through k random cuts and report whether z is
// still inside.  This is the textbook definition of the connection event: the
// leaf of x in a depth-k tree is produced by exactly this refinement.
// Convention matches the library: cells are ]lo,hi], closed at lo == 0, and a
// point sitting on the cut goes left.
inline bool simulate_connection_once(std::span<const double> x,
                                     std::span<const double> z, int k,
                                     bool uniform_positions,
                                     kerf::RandomSource& rng) {
    const std::size_t d = x.size();
    std::vector<double> lo(d, 0.0);
    std::vector<double> hi(d, 1.0);
    for (int cut = 0; cut < k; ++cut) {
        const std::size_t j = rng.below(d);
        const double pos = uniform_positions
                               ? rng.uniform(lo[j], hi[j])
                               : 0.5 * (lo[j] + hi[j]);
        if (x[j] <= pos)
            hi[j] = pos;
        else
            lo[j] = pos;
    }
    for (std::size_t j = 0; j < d; ++j) {
        if (z[j] > hi[j]) return false;
        if (lo[j] == 0.0 ? z[j] < 0.0 : z[j] <= lo[j]) return false;
    }
    return true;
}

inline double simulate_connection(std::span<const double> x,
                                  std::span<const double> z, int k,
                                  bool uniform_positions, std::size_t trials,
                                  kerf::RandomSource rng) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t)
        hits += simulate_connection_once(x, z, k, uniform_positions, rng);
    return static_cast<double>(hits) / static_cast<double>(trials);
}

// Exact centred connection value by enumerating all d^k equally likely
// cut-dimension sequences (positions are deterministic midpoints).
inline double enumerate_centred_connection(std::span<const double> x,
                                           std::span<const double> z, int k) {
    const std::size_t d = x.size();
    std::size_t sequences = 1;
    for (int c = 0; c < k; ++c) sequences *= d;
    std::size_t hits = 0;
    std::vector<double> lo(d), hi(d);
    for (std::size_t s = 0; s < sequences; ++s) {
        lo.assign(d, 0.0);
        hi.assign(d, 1.0);
        std::size_t code = s;
        for (int c = 0; c < k; ++c) {
            const std::size_t j = code % d;
            code /= d;
            const double pos = 0.5 * (lo[j] + hi[j]);
            if (x[j] <= pos)
                hi[j] = pos;
            else
                lo[j] = pos;
        }
        bool inside = true;
        for (std::size_t j = 0; j < d && inside; ++j) {
            if (z[j] > hi[j]) inside = false;
            if (lo[j] == 0.0 ? z[j] < 0.0 : z[j] <= lo[j]) inside = false;
        }
        hits += inside;
    }
    return static_cast<double>(hits) / static_cast<double>(sequences);
}

// Plain mean squared error written as the obvious loop.
inline double mse(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

// Largest t <= 60 with ceil(2^t x) == ceil(2^t z) (0 mapped to cell 1),
// found by the brute-force loop the fast routine is checked against.
inline int threshold_by_loop(double x, double z) {
    int best = -1;
    for (int t = 0; t <= 60; ++t) {
        double cx = std::ceil(std::ldexp(x, t));
        double cz = std::ceil(std::ldexp(z, t));
        if (cx == 0.0) cx = 1.0;
        if (cz == 0.0) cz = 1.0;
        if (cx == cz) best = t;
    }
    return best;
}

// Triangle-kernel integrals in closed form (level-1 uniform kernel).
inline double triangle_integral(double x) {
    // int_0^1 (1 - |z - x|) dz
    return 1.0 - 0.5 * (x * x + (1.0 - x) * (1.0 - x));
}

inline double triangle_moment(double x) {
    // int_0^1 (1 - |z - x|) |z - x| dz
    const double a = x;        // reach to the left
    const double b = 1.0 - x;  // reach to the right
    auto side = [](double r) { return r * r / 2.0 - r * r * r / 3.0; };
    return side(a) + side(b);
}

}  // namespace oracles
