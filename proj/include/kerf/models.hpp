#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "kerf/dataset.hpp"
#include "kerf/random.hpp"

namespace kerf {

// Synthetic regression benchmarks.  X is uniform on [0,1]^d; every formula
// reads the recentred coordinates Xt_j = 2(X_j - 1/2) in [-1,1].  Sampling
// order per row is fixed (d coordinates, then the noise draw if the model
// has one), so a generated table is a pure function of (model, n, d, rng).
//
//   1: Xt1^2 + exp(-Xt2^2)                                    (noiseless)
//   2: Xt1*Xt2 + Xt3^2 - Xt4*Xt7 + Xt8*Xt10 - Xt6^2 + eps
//   3: -sin(2*Xt1) + Xt2^2 + Xt3 - exp(-Xt4) + eps
//   4: Xt1 + (2*Xt2 - 1)^2 + sin(2*pi*Xt3)/(2 - sin(2*pi*Xt3))
//      + sin(2*pi*Xt4) + 2*cos(2*pi*Xt4) + 3*sin(2*pi*Xt4)^2
//      + 4*cos(2*pi*Xt4)^2 + eps
//   5: 1{Xt1 > 0} + Xt2^3 + 1{Xt4 + Xt6 - Xt8 - Xt9 > 1 + Xt10}
//      + exp(-Xt2^2) + eps
//   6: sum_{k=1..10} 1{Xt_k^3 < 0} - 1{Z > 1.25},  Z standard normal
//   7: Xt1^2 + Xt2^2*Xt3*exp(-|Xt4|) + Xt6 - Xt8 + eps
//   8: Xt1 + 3*Xt3^2 - 2*exp(-Xt5) + Xt6                      (noiseless)
//
// eps is centred Gaussian with variance 1/2.

struct SyntheticModel {
    int id;
    std::size_t n;
    int d;
};

// Highest recentred coordinate index each formula reads.
inline int model_min_dim(int id) {
    switch (id) {
        case 1: return 2;
        case 2: return 10;
        case 3: return 4;
        case 4: return 4;
        case 5: return 10;
        case 6: return 10;
        case 7: return 8;
        case 8: return 6;
        default:
            throw std::invalid_argument("unknown model id " + std::to_string(id));
    }
}

// Default (n, d) used in the benchmark tables.
inline SyntheticModel synthetic_model(int id) {
    switch (id) {
        case 1: return {1, 800, 50};
        case 2: return {2, 600, 100};
        case 3: return {3, 600, 100};
        case 4: return {4, 600, 100};
        case 5: return {5, 700, 20};
        case 6: return {6, 500, 30};
        case 7: return {7, 600, 300};
        case 8: return {8, 500, 1000};
        default:
            throw std::invalid_argument("unknown model id " + std::to_string(id));
    }
}

inline SyntheticModel synthetic_model(int id, std::size_t n, int d) {
    if (n == 0) throw std::invalid_argument("model sample count must be positive");
    if (d < model_min_dim(id))
        throw std::invalid_argument("model " + std::to_string(id) + " needs d >= " +
                                    std::to_string(model_min_dim(id)));
    return {id, n, d};
}

inline bool model_has_noise(int id) {
    return id >= 2 && id <= 7;
}

// Deterministic part of the response (the formula minus its random terms).
inline double model_signal(int id, std::span<const double> x) {
    const int need = model_min_dim(id);
    if (static_cast<int>(x.size()) < need)
        throw std::invalid_argument("model " + std::to_string(id) + " needs d >= " +
                                    std::to_string(need));
    auto t = [&](int j) { return 2.0 * (x[static_cast<std::size_t>(j - 1)] - 0.5); };
    constexpr double two_pi = 2.0 * std::numbers::pi;
    switch (id) {
        case 1:
            return t(1) * t(1) + std::exp(-t(2) * t(2));
        case 2:
            return t(1) * t(2) + t(3) * t(3) - t(4) * t(7) + t(8) * t(10) -
                   t(6) * t(6);
        case 3:
            return -std::sin(2.0 * t(1)) + t(2) * t(2) + t(3) - std::exp(-t(4));
        case 4: {
            const double s3 = std::sin(two_pi * t(3));
            const double s4 = std::sin(two_pi * t(4));
            const double c4 = std::cos(two_pi * t(4));
            return t(1) + (2.0 * t(2) - 1.0) * (2.0 * t(2) - 1.0) +
                   s3 / (2.0 - s3) + s4 + 2.0 * c4 + 3.0 * s4 * s4 +
                   4.0 * c4 * c4;
        }
        case 5:
            return (t(1) > 0.0 ? 1.0 : 0.0) + t(2) * t(2) * t(2) +
                   (t(4) + t(6) - t(8) - t(9) > 1.0 + t(10) ? 1.0 : 0.0) +
                   std::exp(-t(2) * t(2));
        case 6: {
            double s = 0.0;
            for (int k = 1; k <= 10; ++k)
                if (t(k) * t(k) * t(k) < 0.0) s += 1.0;
            return s;
        }
        case 7:
            return t(1) * t(1) + t(2) * t(2) * t(3) * std::exp(-std::abs(t(4))) +
                   t(6) - t(8);
        case 8:
            return t(1) + 3.0 * t(3) * t(3) - 2.0 * std::exp(-t(5)) + t(6);
        default:
            throw std::invalid_argument("unknown model id " + std::to_string(id));
    }
}

// Draw n rows of the model.  Coordinates first, then the model's noise draw,
// row by row; the rng is taken by value so the caller's source is untouched.
inline Dataset generate(const SyntheticModel& model, RandomSource rng) {
    if (model.d < model_min_dim(model.id))
        throw std::invalid_argument("model " + std::to_string(model.id) +
                                    " needs d >= " +
                                    std::to_string(model_min_dim(model.id)));
    const std::size_t n = model.n;
    const auto d = static_cast<std::size_t>(model.d);
    std::vector<double> xs(n * d);
    std::vector<double> ys(n);
    const double noise_sd = std::sqrt(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) xs[i * d + j] = rng.next_double();
        const std::span<const double> row{xs.data() + i * d, d};
        double y = model_signal(model.id, row);
        if (model.id == 6) {
            if (rng.normal() > 1.25) y -= 1.0;
        } else if (model_has_noise(model.id)) {
            y += rng.normal(0.0, noise_sd);
        }
        ys[i] = y;
    }
    return Dataset(std::move(xs), std::move(ys), model.d);
}

}  // namespace kerf
