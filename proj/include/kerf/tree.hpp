#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kerf/dataset.hpp"
#include "kerf/random.hpp"

namespace kerf {

// The four randomized partitioning schemes.  centred/uniform/median grow
// complete binary trees of a fixed level; breiman grows an adaptive CART.
enum class TreeKind { centred, uniform, median, breiman };

inline std::string to_string(TreeKind k) {
    switch (k) {
        case TreeKind::centred: return "centred";
        case TreeKind::uniform: return "uniform";
        case TreeKind::median: return "median";
        case TreeKind::breiman: return "breiman";
    }
    return "?";
}

inline TreeKind tree_kind_from_string(std::string_view s) {
    if (s == "centred") return TreeKind::centred;
    if (s == "uniform") return TreeKind::uniform;
    if (s == "median") return TreeKind::median;
    if (s == "breiman") return TreeKind::breiman;
    throw DataError("unknown tree kind '" + std::string(s) + "'");
}

struct BreimanParams {
    std::size_t min_samples_split = 2;   // nodes smaller than this become leaves
    std::size_t min_leaf = 1;            // both children must keep at least this many
    double max_features = 0.333;         // fraction of dimensions tried per node
};

struct TreeParams {
    TreeKind kind = TreeKind::centred;
    int level = 0;                       // depth of the complete tree (non-adaptive kinds)
    BreimanParams breiman{};
};

// Axis-aligned box.  Every side is the half-open interval ]lo, hi], closed
// at 0 instead when lo == 0, which makes the level-k cells a true partition
// of [0,1]^d.  locate() below routes with x <= split to the left child, the
// exact complement of this convention.
struct Cell {
    std::vector<double> lower;
    std::vector<double> upper;

    bool contains(std::span<const double> x) const {
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (x[j] > upper[j]) return false;
            if (lower[j] == 0.0 ? x[j] < 0.0 : x[j] <= lower[j]) return false;
        }
        return true;
    }
};

struct TreeNode {
    int split_dim = -1;        // -1 marks a leaf
    double split_pos = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int64_t count = 0;    // leaf only: training points routed here
    double sum = 0.0;          // leaf only: their response total
};

// One randomized tree.  Nodes are stored in preorder (root at 0).  Leaf
// statistics are taken over the tree's own training multiset: the bag when
// one was resampled, the full sample otherwise.
class PartitionTree {
public:
    TreeParams params;
    int dim = 0;
    std::vector<TreeNode> nodes;
    std::vector<std::uint32_t> bag;   // resampled ids; empty = every sample once

    // Leaf (node index) whose cell contains x.
    int locate(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(dim))
            throw std::invalid_argument("locate: query has dimension " +
                                        std::to_string(x.size()) + ", tree has " +
                                        std::to_string(dim));
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].split_dim >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(nd.split_dim)] <= nd.split_pos ? nd.left
                                                                          : nd.right;
        }
        return i;
    }

    std::int64_t leaf_count(std::span<const double> x) const {
        return nodes[static_cast<std::size_t>(locate(x))].count;
    }

    // Mean response of the leaf containing x; 0 when the leaf is empty.
    double predict(std::span<const double> x) const {
        const TreeNode& nd = nodes[static_cast<std::size_t>(locate(x))];
        return nd.count == 0 ? 0.0 : nd.sum / static_cast<double>(nd.count);
    }

    std::size_t leaf_total() const {
        std::size_t c = 0;
        for (const auto& nd : nodes) c += nd.split_dim < 0;
        return c;
    }

    // Every leaf with its geometric cell, in preorder.
    std::vector<std::pair<int, Cell>> leaf_cells() const {
        std::vector<std::pair<int, Cell>> out;
        Cell cell{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                  std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
        walk_cells(0, cell, out);
        return out;
    }

private:
    void walk_cells(int i, Cell& cell, std::vector<std::pair<int, Cell>>& out) const {
        const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
        if (nd.split_dim < 0) {
            out.emplace_back(i, cell);
            return;
        }
        const auto j = static_cast<std::size_t>(nd.split_dim);
        const double hi = cell.upper[j];
        const double lo = cell.lower[j];
        cell.upper[j] = nd.split_pos;
        walk_cells(nd.left, cell, out);
        cell.upper[j] = hi;
        cell.lower[j] = nd.split_pos;
        walk_cells(nd.right, cell, out);
        cell.lower[j] = lo;
    }
};

namespace detail {

// Median of the coordinate values of a sample-id range (bag multiset).
inline double coordinate_median(std::vector<double>& scratch) {
    const std::size_t m = scratch.size();
    auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(m / 2);
    std::nth_element(scratch.begin(), mid, scratch.end());
    if (m % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(scratch.begin(), mid);
    return 0.5 * (lower + upper);
}

struct TreeBuilder {
    const Dataset& data;
    PartitionTree& tree;
    RandomSource rng;
    std::vector<std::uint32_t>& ids;   // bag-expanded sample ids, partitioned in place
    std::vector<double> scratch;

    int make_leaf(std::size_t lo, std::size_t hi) {
        TreeNode nd;
        nd.count = static_cast<std::int64_t>(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) nd.sum += data.response(ids[i]);
        tree.nodes.push_back(nd);
        return static_cast<int>(tree.nodes.size() - 1);
    }

    // Complete tree of the requested level; split positions per kind.
    int build_fixed(std::size_t lo, std::size_t hi, int depth, Cell& cell) {
        if (depth == tree.params.level) return make_leaf(lo, hi);
        const auto j = static_cast<std::size_t>(rng.below(
            static_cast<std::uint64_t>(tree.dim)));
        const double clo = cell.lower[j];
        const double chi = cell.upper[j];
        double pos;
        switch (tree.params.kind) {
            case TreeKind::centred:
                pos = 0.5 * (clo + chi);
                break;
            case TreeKind::uniform:
                pos = clo + rng.next_double_open() * (chi - clo);
                break;
            default: {   // median
                if (hi - lo < 2) {
                    pos = 0.5 * (clo + chi);
                    break;
                }
                scratch.clear();
                for (std::size_t i = lo; i < hi; ++i)
                    scratch.push_back(data.point(ids[i])[j]);
                pos = coordinate_median(scratch);
                // A median sitting on the cell boundary would leave one child
                // with zero width; fall back to the midpoint instead.
                if (!(pos > clo && pos < chi)) pos = 0.5 * (clo + chi);
                break;
            }
        }
        if (!(pos > clo && pos < chi)) pos = 0.5 * (clo + chi);

        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(self)].split_dim = static_cast<int>(j);
        tree.nodes[static_cast<std::size_t>(self)].split_pos = pos;

        const auto split_at = static_cast<std::size_t>(
            std::partition(ids.begin() + static_cast<std::ptrdiff_t>(lo),
                           ids.begin() + static_cast<std::ptrdiff_t>(hi),
                           [&](std::uint32_t id) { return data.point(id)[j] <= pos; }) -
            ids.begin());

        cell.upper[j] = pos;
        const int l = build_fixed(lo, split_at, depth + 1, cell);
        cell.upper[j] = chi;
        cell.lower[j] = pos;
        const int r = build_fixed(split_at, hi, depth + 1, cell);
        cell.lower[j] = clo;
        tree.nodes[static_cast<std::size_t>(self)].left = l;
        tree.nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }

    // CART: exhaustive variance-reduction search over a random coordinate
    // subset, split candidates at midpoints of consecutive distinct values.
    int build_cart(std::size_t lo, std::size_t hi) {
        const std::size_t m = hi - lo;
        const BreimanParams& bp = tree.params.breiman;
        if (m < bp.min_samples_split || m < 2 * bp.min_leaf || m < 2)
            return make_leaf(lo, hi);

        const auto d = static_cast<std::size_t>(tree.dim);
        auto mtry = static_cast<std::size_t>(
            std::ceil(bp.max_features * static_cast<double>(d)));
        mtry = std::clamp<std::size_t>(mtry, 1, d);

        // Partial Fisher-Yates for the candidate dimensions, then ascending
        // order so equal scores resolve to the lowest dimension.
        std::vector<std::uint32_t> dims(d);
        for (std::size_t j = 0; j < d; ++j) dims[j] = static_cast<std::uint32_t>(j);
        for (std::size_t j = 0; j < mtry; ++j) {
            const auto pick = j + static_cast<std::size_t>(rng.below(d - j));
            std::swap(dims[j], dims[pick]);
        }
        dims.resize(mtry);
        std::sort(dims.begin(), dims.end());

        struct Best {
            double score = -1.0;   // sum of child-mean squared masses; bigger is better
            int dim = -1;
            double pos = 0.0;
        } best;

        std::vector<std::pair<double, double>> vals;   // (coordinate, response)
        for (const auto j : dims) {
            vals.clear();
            for (std::size_t i = lo; i < hi; ++i)
                vals.emplace_back(data.point(ids[i])[j], data.response(ids[i]));
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (vals.front().first == vals.back().first) continue;

            std::vector<double> prefix(m + 1, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                prefix[i + 1] = prefix[i] + vals[i].second;

            for (std::size_t i = 0; i + 1 < m; ++i) {
                if (vals[i].first == vals[i + 1].first) continue;
                const double pos = 0.5 * (vals[i].first + vals[i + 1].first);
                // Rounding can land the midpoint on a sample value; size the
                // children by the actual routing predicate.
                auto right_begin = std::upper_bound(
                    vals.begin(), vals.end(), pos,
                    [](double p, const auto& v) { return p < v.first; });
                const auto nl = static_cast<std::size_t>(right_begin - vals.begin());
                const std::size_t nr = m - nl;
                if (nl < bp.min_leaf || nr < bp.min_leaf || nl == 0 || nr == 0)
                    continue;
                const double sl = prefix[nl];
                const double sr = prefix[m] - sl;
                const double score = sl * sl / static_cast<double>(nl) +
                                     sr * sr / static_cast<double>(nr);
                if (score > best.score ||
                    (score == best.score &&
                     (static_cast<int>(j) < best.dim ||
                      (static_cast<int>(j) == best.dim && pos < best.pos)))) {
                    best = {score, static_cast<int>(j), pos};
                }
            }
        }
        if (best.dim < 0) return make_leaf(lo, hi);   // no admissible cut

        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(self)].split_dim = best.dim;
        tree.nodes[static_cast<std::size_t>(self)].split_pos = best.pos;

        const auto jd = static_cast<std::size_t>(best.dim);
        const auto split_at = static_cast<std::size_t>(
            std::partition(ids.begin() + static_cast<std::ptrdiff_t>(lo),
                           ids.begin() + static_cast<std::ptrdiff_t>(hi),
                           [&](std::uint32_t id) {
                               return data.point(id)[jd] <= best.pos;
                           }) -
            ids.begin());

        const int l = build_cart(lo, split_at);
        const int r = build_cart(split_at, hi);
        tree.nodes[static_cast<std::size_t>(self)].left = l;
        tree.nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
};

}  // namespace detail

// Grow one tree on data (or on the given bag of sample ids).  The rng is
// consumed in a data-independent order for centred/uniform trees, so their
// shapes depend only on (rng, level, dim).
inline PartitionTree build_tree(const TreeParams& params, const Dataset& data,
                                RandomSource rng,
                                std::span<const std::uint32_t> bag = {}) {
    if (params.kind != TreeKind::breiman) {
        if (params.level < 0)
            throw std::invalid_argument("tree level must be nonnegative");
        if (params.level > 25)
            throw std::invalid_argument(
                "tree level above 25 would allocate 2^26+ nodes; use the "
                "analytic kernels for deep levels");
    } else {
        if (params.breiman.min_samples_split < 2)
            throw std::invalid_argument("min_samples_split must be at least 2");
        if (params.breiman.min_leaf < 1)
            throw std::invalid_argument("min_leaf must be at least 1");
        if (!(params.breiman.max_features > 0.0 && params.breiman.max_features <= 1.0))
            throw std::invalid_argument("max_features must lie in (0,1]");
    }

    PartitionTree tree;
    tree.params = params;
    tree.dim = data.dim();
    tree.bag.assign(bag.begin(), bag.end());

    std::vector<std::uint32_t> ids;
    if (bag.empty()) {
        ids.resize(data.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            ids[i] = static_cast<std::uint32_t>(i);
    } else {
        ids.assign(bag.begin(), bag.end());
        for (const auto id : ids)
            if (id >= data.size())
                throw std::invalid_argument("bag references sample " +
                                            std::to_string(id) + " outside dataset");
    }

    detail::TreeBuilder builder{data, tree, rng, ids, {}};
    if (params.kind == TreeKind::breiman) {
        tree.nodes.reserve(2 * ids.size());
        builder.build_cart(0, ids.size());
    } else {
        tree.nodes.reserve((std::size_t{2} << params.level) - 1);
        Cell cell{std::vector<double>(static_cast<std::size_t>(tree.dim), 0.0),
                  std::vector<double>(static_cast<std::size_t>(tree.dim), 1.0)};
        builder.build_fixed(0, ids.size(), 0, cell);
    }
    return tree;
}

// Tree-depth policies.  `experiment` reproduces the benchmark setting
// floor(log2 n); the rate policies solve for the level that balances the
// families' bias and variance envelopes, dropping constant factors:
// centred uses k with 2^k * exp(3k/d) ~ n/(log n)^2, uniform the same with
// exp(2k/d).  All results are floored at 1.
enum class LevelRule { experiment, centred_rate, uniform_rate };

inline int suggest_level(std::size_t n, int d, LevelRule rule) {
    if (n == 0) throw std::invalid_argument("suggest_level: empty sample");
    if (d < 1) throw std::invalid_argument("suggest_level: dimension must be >= 1");
    switch (rule) {
        case LevelRule::experiment: {
            const int k = std::bit_width(n) - 1;   // floor(log2 n)
            return std::max(1, k);
        }
        case LevelRule::centred_rate:
        case LevelRule::uniform_rate: {
            if (n < 3) return 1;
            const double ln_n = std::log(static_cast<double>(n));
            const double target = std::log(static_cast<double>(n) / (ln_n * ln_n));
            const double slope = (rule == LevelRule::centred_rate) ? 3.0 : 2.0;
            const double denom = std::numbers::ln2 + slope / static_cast<double>(d);
            const int k = static_cast<int>(std::ceil(target / denom));
            return std::max(1, k);
        }
    }
    throw std::invalid_argument("unknown level rule");
}

}  // namespace kerf
