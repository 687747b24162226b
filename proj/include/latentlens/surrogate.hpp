#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlens/dataset.hpp"
#include "latentlens/neighborhood.hpp"

namespace latentlens {

struct Condition {
    enum class Op { LessEq, Greater };
    int feature = 0;
    Op op = Op::LessEq;
    double threshold = 0.0;

    // Throws std::out_of_range when feature >= h.size().
    bool holds(const LatentCode& h) const;
    bool operator==(const Condition&) const = default;
};

struct Rule {
    std::vector<Condition> conditions;  // conjunction
    int consequent = -1;

    bool operator==(const Rule&) const = default;
};

bool satisfies(const Rule& r, const LatentCode& h);
int violated_conditions(const Rule& r, const LatentCode& h);

// Collapses repeated conditions on a feature into the tightest interval,
// keeping the order in which features first appear.
Rule merge_conditions(const Rule& r);
// False when some feature's interval is empty.
bool is_satisfiable(const Rule& r);

// "{7 > -1.01, 99 <= 0.07} -> {class: NV}". Codes come from the catalog when
// given, otherwise the numeric label is printed.
std::string to_text(const Rule& r, const ClassCatalog* classes = nullptr, int precision = 2);
nlohmann::json to_json(const Rule& r, const ClassCatalog* classes = nullptr);

struct SurrogateConfig {
    int max_depth = 8;
    int min_leaf = 2;
};

struct TreeNode {
    // Split nodes: feature >= 0, z[feature] <= threshold goes left.
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = -1;                // majority class (smallest label on ties)
    std::map<int, int> counts;     // training instances per class
    int size = 0;
    int depth = 0;

    bool is_leaf() const { return feature < 0; }
    double purity() const { return size ? static_cast<double>(counts.at(label)) / size : 0.0; }
};

class SurrogateTree {
public:
    SurrogateTree() = default;
    SurrogateTree(std::vector<TreeNode> nodes, int dim) : nodes_(std::move(nodes)), dim_(dim) {}

    int predict(const LatentCode& z) const;
    int leaf_of(const LatentCode& z) const;
    std::vector<int> leaves() const;
    // Raw root-to-leaf conditions (unmerged).
    Rule path_rule(int leaf) const;
    std::size_t depth() const;
    int dim() const { return dim_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

private:
    std::vector<TreeNode> nodes_;
    int dim_ = 0;
};

// Greedy CART on Gini impurity. Candidate thresholds are midpoints between
// consecutive distinct values; ties go to the lower feature index, then the
// lower threshold.
SurrogateTree fit_tree(std::span<const LatentCode> codes, std::span<const int> labels, const SurrogateConfig& cfg = {});

// Trains on the valid instances of the neighborhood. Throws
// DegenerateLocality when they carry fewer than two labels.
SurrogateTree fit_surrogate(const Neighborhood& nbh, const SurrogateConfig& cfg = {});

// Path rule of z's leaf, merged.
Rule extract_rule(const SurrogateTree& tree, const LatentCode& z);

struct CounterfactualRule {
    Rule rule;
    int leaf = -1;
    int violated = 0;
    double purity = 0.0;
    int leaf_size = 0;
};

// Leaves whose class differs from z's leaf, ranked by the number of
// conditions z violates, then purity (desc), then leaf size (desc), then leaf
// index. Empty when the tree predicts a single class.
std::vector<CounterfactualRule> rank_counterfactuals(const SurrogateTree& tree, const LatentCode& z);
// Same ranking over leaves whose class differs from `reference` instead of
// from z's leaf.
std::vector<CounterfactualRule> rank_counterfactuals(const SurrogateTree& tree, const LatentCode& z, int reference);
std::vector<Rule> extract_counterfactual_rules(const SurrogateTree& tree, const LatentCode& z, std::size_t limit);

double fidelity(const SurrogateTree& tree, std::span<const LatentCode> codes, std::span<const int> labels);
// Agreement with black-box labels over the neighborhood's valid instances.
double fidelity(const SurrogateTree& tree, const Neighborhood& nbh);

nlohmann::json to_json(const SurrogateTree& tree);

}  // namespace latentlens
