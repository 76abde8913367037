#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kerf/dataset.hpp"

namespace kerf {

// Per-column affine map onto [0,1] remembered from a training table, so the
// same transform can be replayed on later query points.  A constant column
// (hi == lo) is pinned to 0.5 and its inverse returns the constant.
struct ScalingParams {
    struct Column {
        double lo;
        double hi;
    };
    std::vector<Column> columns;

    double forward(std::size_t col, double v) const {
        const auto& c = columns[col];
        if (c.hi == c.lo) return 0.5;
        double s = (v - c.lo) / (c.hi - c.lo);
        if (s < 0.0) s = 0.0;
        if (s > 1.0) s = 1.0;
        return s;
    }

    double inverse(std::size_t col, double s) const {
        const auto& c = columns[col];
        if (c.hi == c.lo) return c.lo;
        return c.lo + s * (c.hi - c.lo);
    }
};

// Fit min/max per feature column over raw row-major data and return the
// scaled copy together with the fitted parameters.
inline std::pair<std::vector<double>, ScalingParams> minmax_scale(
    std::span<const double> raw, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0 || raw.size() != rows * cols)
        throw DataError("minmax_scale: shape mismatch");
    ScalingParams params;
    params.columns.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double lo = raw[c];
        double hi = raw[c];
        for (std::size_t r = 1; r < rows; ++r) {
            const double v = raw[r * cols + c];
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
        params.columns[c] = {lo, hi};
    }
    std::vector<double> scaled(raw.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            scaled[r * cols + c] = params.forward(c, raw[r * cols + c]);
    return {std::move(scaled), std::move(params)};
}

}  // namespace kerf
