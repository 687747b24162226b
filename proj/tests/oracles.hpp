#pragma once

// Independent reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "latentlens/surrogate.hpp"

namespace latentlens::testing {

// Confusion-matrix balanced accuracy: mean over true classes of hits / row sum.
inline double balanced_accuracy_oracle(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::map<int, std::pair<int, int>> rows;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& r = rows[truth[i]];
        r.second += 1;
        r.first += pred[i] == truth[i];
    }
    double s = 0.0;
    for (const auto& [_, r] : rows) s += static_cast<double>(r.first) / r.second;
    return s / static_cast<double>(rows.size());
}

// Per-feature half-open interval (lo, hi] of a leaf, found by walking the
// node array from the root.
struct LeafBox {
    int leaf = -1;
    std::vector<double> lo, hi;
};

inline std::vector<LeafBox> enumerate_leaf_boxes(const SurrogateTree& tree) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<LeafBox> out;
    std::vector<LeafBox> stack{{0, std::vector<double>(tree.dim(), -inf), std::vector<double>(tree.dim(), inf)}};
    while (!stack.empty()) {
        LeafBox b = stack.back();
        stack.pop_back();
        const auto& n = tree.nodes()[b.leaf];
        if (n.is_leaf()) {
            out.push_back(b);
            continue;
        }
        LeafBox l = b, r = b;
        l.leaf = n.left;
        l.hi[n.feature] = std::min(l.hi[n.feature], n.threshold);
        r.leaf = n.right;
        r.lo[n.feature] = std::max(r.lo[n.feature], n.threshold);
        stack.push_back(l);
        stack.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const LeafBox& a, const LeafBox& b) { return a.leaf < b.leaf; });
    return out;
}

inline bool box_contains(const LeafBox& b, const LatentCode& z) {
    for (std::size_t f = 0; f < b.lo.size(); ++f)
        if (!(z[f] > b.lo[f] && z[f] <= b.hi[f])) return false;
    return true;
}

// Counts the finite bounds of a box that z breaks.
inline int box_violations(const LeafBox& b, const LatentCode& z) {
    int v = 0;
    for (std::size_t f = 0; f < b.lo.size(); ++f) {
        if (std::isfinite(b.lo[f]) && !(z[f] > b.lo[f])) ++v;
        if (std::isfinite(b.hi[f]) && !(z[f] <= b.hi[f])) ++v;
    }
    return v;
}

// Leaf indices of other-class leaves in brute-force rank order.
inline std::vector<int> counterfactual_order_oracle(const SurrogateTree& tree, const LatentCode& z) {
    const auto boxes = enumerate_leaf_boxes(tree);
    int own_label = -1;
    for (const auto& b : boxes)
        if (box_contains(b, z)) own_label = tree.nodes()[b.leaf].label;
    std::vector<std::tuple<int, double, int, int>> keyed;  // violated, -purity, -size, leaf
    for (const auto& b : boxes) {
        const auto& n = tree.nodes()[b.leaf];
        if (n.label == own_label) continue;
        int top = 0;
        for (const auto& [_, c] : n.counts) top = std::max(top, c);
        keyed.emplace_back(box_violations(b, z), -static_cast<double>(top) / n.size, -n.size, b.leaf);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<int> order;
    for (const auto& k : keyed) order.push_back(std::get<3>(k));
    return order;
}

// Random tree over random points with random labels.
inline SurrogateTree random_tree(std::mt19937_64& rng, int dim, int points, int classes, int max_depth,
                                 std::vector<LatentCode>* codes_out = nullptr) {
    std::normal_distribution<double> nd;
    std::vector<LatentCode> codes(points);
    std::vector<int> labels(points);
    for (int i = 0; i < points; ++i) {
        codes[i].values.resize(dim);
        for (double& v : codes[i].values) v = nd(rng);
        labels[i] = static_cast<int>(rng() % classes);
    }
    auto tree = fit_tree(codes, labels, {max_depth, 2});
    if (codes_out) *codes_out = std::move(codes);
    return tree;
}

// Per-pixel median over exemplar differences, channel-mean display.
inline std::vector<double> saliency_oracle(const std::vector<double>& x, const std::vector<std::vector<double>>& ex) {
    std::vector<double> out(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        std::vector<double> d;
        for (const auto& e : ex) d.push_back(x[p] - e[p]);
        std::sort(d.begin(), d.end());
        const std::size_t n = d.size();
        out[p] = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    }
    return out;
}

}  // namespace latentlens::testing
