#include "latentlens/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace latentlens {

bool Condition::holds(const LatentCode& h) const {
    if (feature < 0 || static_cast<std::size_t>(feature) >= h.size())
        throw std::out_of_range("condition on feature " + std::to_string(feature) + " but latent has " +
                                std::to_string(h.size()) + " features");
    return op == Op::LessEq ? h[feature] <= threshold : h[feature] > threshold;
}

bool satisfies(const Rule& r, const LatentCode& h) {
    bool ok = true;
    // Evaluate every condition so bad feature indices always raise.
    for (const auto& c : r.conditions) ok = c.holds(h) && ok;
    return ok;
}

int violated_conditions(const Rule& r, const LatentCode& h) {
    int v = 0;
    for (const auto& c : r.conditions) v += c.holds(h) ? 0 : 1;
    return v;
}

namespace {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();  // exclusive
    double hi = std::numeric_limits<double>::infinity();   // inclusive
    bool has_lo = false, has_hi = false;
};

}  // namespace

Rule merge_conditions(const Rule& r) {
    std::vector<int> order;
    std::map<int, Interval> iv;
    for (const auto& c : r.conditions) {
        if (!iv.count(c.feature)) order.push_back(c.feature);
        auto& in = iv[c.feature];
        if (c.op == Condition::Op::LessEq) {
            in.hi = std::min(in.hi, c.threshold);
            in.has_hi = true;
        } else {
            in.lo = std::max(in.lo, c.threshold);
            in.has_lo = true;
        }
    }
    Rule out;
    out.consequent = r.consequent;
    for (int f : order) {
        const auto& in = iv[f];
        if (in.has_lo) out.conditions.push_back({f, Condition::Op::Greater, in.lo});
        if (in.has_hi) out.conditions.push_back({f, Condition::Op::LessEq, in.hi});
    }
    return out;
}

bool is_satisfiable(const Rule& r) {
    std::map<int, Interval> iv;
    for (const auto& c : r.conditions) {
        auto& in = iv[c.feature];
        if (c.op == Condition::Op::LessEq)
            in.hi = std::min(in.hi, c.threshold);
        else
            in.lo = std::max(in.lo, c.threshold);
    }
    for (const auto& [f, in] : iv)
        if (!(in.lo < in.hi)) return false;
    return true;
}

namespace {

std::string class_name(int label, const ClassCatalog* classes) {
    if (classes && label >= 0 && label < static_cast<int>(classes->size())) return classes->code(label);
    return std::to_string(label);
}

}  // namespace

std::string to_text(const Rule& r, const ClassCatalog* classes, int precision) {
    std::string s = "{";
    char buf[64];
    for (std::size_t i = 0; i < r.conditions.size(); ++i) {
        const auto& c = r.conditions[i];
        std::snprintf(buf, sizeof buf, "%d %s %.*f", c.feature, c.op == Condition::Op::LessEq ? "<=" : ">", precision,
                      c.threshold);
        if (i) s += ", ";
        s += buf;
    }
    s += "} -> {class: " + class_name(r.consequent, classes) + "}";
    return s;
}

nlohmann::json to_json(const Rule& r, const ClassCatalog* classes) {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : r.conditions)
        conds.push_back({{"feature", c.feature},
                         {"op", c.op == Condition::Op::LessEq ? "<=" : ">"},
                         {"threshold", c.threshold}});
    return {{"conditions", conds},
            {"consequent", r.consequent},
            {"class", class_name(r.consequent, classes)},
            {"text", to_text(r, classes)}};
}

// ---------------------------------------------------------------- tree

int SurrogateTree::leaf_of(const LatentCode& z) const {
    if (nodes_.empty()) throw std::logic_error("surrogate tree is not fitted");
    if (static_cast<int>(z.size()) != dim_)
        throw ShapeError("latent code has length " + std::to_string(z.size()) + ", tree expects " +
                         std::to_string(dim_));
    int i = 0;
    while (!nodes_[i].is_leaf()) i = z[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return i;
}

int SurrogateTree::predict(const LatentCode& z) const { return nodes_[leaf_of(z)].label; }

std::vector<int> SurrogateTree::leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
    return out;
}

Rule SurrogateTree::path_rule(int leaf) const {
    if (leaf < 0 || leaf >= static_cast<int>(nodes_.size()) || !nodes_[leaf].is_leaf())
        throw std::invalid_argument("not a leaf: " + std::to_string(leaf));
    std::vector<int> parent(nodes_.size(), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!nodes_[i].is_leaf()) {
            parent[nodes_[i].left] = static_cast<int>(i);
            parent[nodes_[i].right] = static_cast<int>(i);
        }
    Rule r;
    r.consequent = nodes_[leaf].label;
    for (int c = leaf, p = parent[leaf]; p >= 0; c = p, p = parent[p]) {
        const auto& n = nodes_[p];
        r.conditions.push_back(
            {n.feature, c == n.left ? Condition::Op::LessEq : Condition::Op::Greater, n.threshold});
    }
    std::reverse(r.conditions.begin(), r.conditions.end());
    return r;
}

std::size_t SurrogateTree::depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return static_cast<std::size_t>(d);
}

namespace {

double gini(const std::map<int, int>& counts, int n) {
    if (n == 0) return 0.0;
    double s = 1.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        s -= p * p;
    }
    return s;
}

struct Builder {
    std::span<const LatentCode> x;
    std::span<const int> y;
    SurrogateConfig cfg;
    int dim;
    std::vector<TreeNode> nodes;

    int build(std::vector<int> idx, int depth) {
        TreeNode node;
        node.depth = depth;
        node.size = static_cast<int>(idx.size());
        for (int i : idx) ++node.counts[y[i]];
        int best_count = -1;
        for (const auto& [label, c] : node.counts)
            if (c > best_count) {
                best_count = c;
                node.label = label;
            }
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(node);
        if (depth >= cfg.max_depth || node.counts.size() < 2 || node.size < 2 * cfg.min_leaf) return id;

        const double parent_impurity = gini(node.counts, node.size);
        double best = parent_impurity;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<int> sorted = idx;
        for (int f = 0; f < dim; ++f) {
            std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) { return x[a][f] < x[b][f]; });
            std::map<int, int> left;
            std::map<int, int> right = node.counts;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const int yi = y[sorted[i]];
                ++left[yi];
                if (--right[yi] == 0) right.erase(yi);
                const int nl = static_cast<int>(i + 1), nr = node.size - nl;
                const double a = x[sorted[i]][f], b = x[sorted[i + 1]][f];
                if (a == b || nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
                const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / node.size;
                double t = 0.5 * (a + b);
                if (!(t >= a && t < b)) t = a;  // midpoint rounding onto b
                if (imp < best - 1e-12) {
                    best = imp;
                    best_feature = f;
                    best_threshold = t;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<int> l, r;
        for (int i : idx) (x[i][best_feature] <= best_threshold ? l : r).push_back(i);
        nodes[id].feature = best_feature;
        nodes[id].threshold = best_threshold;
        const int li = build(std::move(l), depth + 1);
        const int ri = build(std::move(r), depth + 1);
        nodes[id].left = li;
        nodes[id].right = ri;
        return id;
    }
};

}  // namespace

SurrogateTree fit_tree(std::span<const LatentCode> codes, std::span<const int> labels, const SurrogateConfig& cfg) {
    if (codes.empty()) throw std::invalid_argument("fit_tree: no training instances");
    if (codes.size() != labels.size()) throw std::invalid_argument("fit_tree: codes and labels differ in length");
    if (cfg.max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (cfg.min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
    const int dim = static_cast<int>(codes[0].size());
    for (const auto& c : codes) {
        if (static_cast<int>(c.size()) != dim) throw ShapeError("fit_tree: latent codes differ in length");
        for (double v : c.values)
            if (!std::isfinite(v)) throw std::invalid_argument("fit_tree: non-finite coordinate");
    }
    Builder b{codes, labels, cfg, dim, {}};
    std::vector<int> idx(codes.size());
    std::iota(idx.begin(), idx.end(), 0);
    b.build(std::move(idx), 0);
    return SurrogateTree(std::move(b.nodes), dim);
}

SurrogateTree fit_surrogate(const Neighborhood& nbh, const SurrogateConfig& cfg) {
    std::vector<LatentCode> codes;
    std::vector<int> labels;
    for (const auto& h : nbh.instances)
        if (h.valid) {
            codes.push_back(h.code);
            labels.push_back(h.label);
        }
    std::vector<int> u = labels;
    std::sort(u.begin(), u.end());
    const auto distinct = static_cast<std::size_t>(std::unique(u.begin(), u.end()) - u.begin());
    if (distinct < 2)
        throw DegenerateLocality("surrogate needs at least two labels among valid instances, found " +
                                     std::to_string(distinct),
                                 nbh);
    return fit_tree(codes, labels, cfg);
}

Rule extract_rule(const SurrogateTree& tree, const LatentCode& z) {
    return merge_conditions(tree.path_rule(tree.leaf_of(z)));
}

std::vector<CounterfactualRule> rank_counterfactuals(const SurrogateTree& tree, const LatentCode& z) {
    return rank_counterfactuals(tree, z, tree.predict(z));
}

std::vector<CounterfactualRule> rank_counterfactuals(const SurrogateTree& tree, const LatentCode& z, int reference) {
    const int own_label = reference;
    std::vector<CounterfactualRule> out;
    for (int leaf : tree.leaves()) {
        const auto& n = tree.nodes()[leaf];
        if (n.label == own_label) continue;
        CounterfactualRule c;
        c.rule = merge_conditions(tree.path_rule(leaf));
        c.leaf = leaf;
        c.violated = violated_conditions(c.rule, z);
        c.purity = n.purity();
        c.leaf_size = n.size;
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const CounterfactualRule& a, const CounterfactualRule& b) {
        if (a.violated != b.violated) return a.violated < b.violated;
        if (a.purity != b.purity) return a.purity > b.purity;
        if (a.leaf_size != b.leaf_size) return a.leaf_size > b.leaf_size;
        return a.leaf < b.leaf;
    });
    return out;
}

std::vector<Rule> extract_counterfactual_rules(const SurrogateTree& tree, const LatentCode& z, std::size_t limit) {
    std::vector<Rule> out;
    for (auto& c : rank_counterfactuals(tree, z)) {
        if (out.size() >= limit) break;
        out.push_back(std::move(c.rule));
    }
    return out;
}

double fidelity(const SurrogateTree& tree, std::span<const LatentCode> codes, std::span<const int> labels) {
    if (codes.size() != labels.size()) throw std::invalid_argument("fidelity: codes and labels differ in length");
    if (codes.empty()) return 0.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) agree += tree.predict(codes[i]) == labels[i];
    return static_cast<double>(agree) / static_cast<double>(codes.size());
}

double fidelity(const SurrogateTree& tree, const Neighborhood& nbh) {
    std::vector<LatentCode> codes;
    std::vector<int> labels;
    for (const auto& h : nbh.instances)
        if (h.valid) {
            codes.push_back(h.code);
            labels.push_back(h.label);
        }
    return fidelity(tree, codes, labels);
}

nlohmann::json to_json(const SurrogateTree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
        nlohmann::json counts = nlohmann::json::object();
        for (const auto& [label, c] : n.counts) counts[std::to_string(label)] = c;
        nlohmann::json j{{"label", n.label}, {"size", n.size}, {"counts", counts}};
        if (!n.is_leaf()) {
            j["feature"] = n.feature;
            j["threshold"] = n.threshold;
            j["left"] = n.left;
            j["right"] = n.right;
        }
        nodes.push_back(std::move(j));
    }
    return {{"dim", tree.dim()}, {"nodes", nodes}};
}

}  // namespace latentlens
