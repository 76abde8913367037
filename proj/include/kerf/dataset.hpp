#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kerf/random.hpp"

namespace kerf {

// Malformed user-supplied input: CSV contents, shape mismatches,
// out-of-range coordinates, inconsistent configuration.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A regression sample: n points in [0,1]^d (row-major) with one real
// response each.  Immutable after construction; cheap to move.
class Dataset {
public:
    Dataset(std::vector<double> coords, std::vector<double> responses, int dim)
        : coords_(std::move(coords)), responses_(std::move(responses)), dim_(dim) {
        if (dim_ < 1)
            throw DataError("dataset dimension must be at least 1");
        if (responses_.empty())
            throw DataError("dataset must contain at least one sample");
        if (coords_.size() != responses_.size() * static_cast<std::size_t>(dim_))
            throw DataError("coordinate array does not match n*d");
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            if (!(coords_[i] >= 0.0 && coords_[i] <= 1.0))
                throw DataError("coordinate outside [0,1] at flat index " +
                                std::to_string(i) + " (value " +
                                std::to_string(coords_[i]) +
                                "); rescale the table first");
        }
    }

    int dim() const { return dim_; }
    std::size_t size() const { return responses_.size(); }

    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + i * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }
    double response(std::size_t i) const { return responses_[i]; }
    std::span<const double> responses() const { return responses_; }
    std::span<const double> coords() const { return coords_; }

private:
    std::vector<double> coords_;
    std::vector<double> responses_;
    int dim_;
};

// Disjoint train/test partition by uniform shuffle.  fraction is the train
// share; train receives ceil(fraction*n) points and both halves are nonempty
// unless fraction pins everything to one side.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& data,
                                                    double fraction,
                                                    RandomSource rng) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw DataError("train fraction must lie strictly between 0 and 1");
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {   // Fisher-Yates
        const std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::size_t n_train =
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    if (n_train == 0) n_train = 1;
    if (n_train >= n) n_train = n - 1;
    if (n < 2) throw DataError("cannot split a single-sample dataset");

    const int d = data.dim();
    auto gather = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> xs;
        std::vector<double> ys;
        xs.reserve((hi - lo) * static_cast<std::size_t>(d));
        ys.reserve(hi - lo);
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const auto p = data.point(order[idx]);
            xs.insert(xs.end(), p.begin(), p.end());
            ys.push_back(data.response(order[idx]));
        }
        return Dataset(std::move(xs), std::move(ys), d);
    };
    return {gather(0, n_train), gather(n_train, n)};
}

// Mean squared prediction error over paired vectors.
inline double empirical_risk(std::span<const double> predicted,
                             std::span<const double> truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("risk: prediction/truth length mismatch");
    if (predicted.empty())
        throw std::invalid_argument("risk: empty vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - truth[i];
        acc += e * e;
    }
    return acc / static_cast<double>(predicted.size());
}

}  // namespace kerf
