#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "latentlens/neighborhood.hpp"
#include "latentlens/surrogate.hpp"
#include "oracles.hpp"

using namespace latentlens;
using namespace latentlens::testing;
using Op = Condition::Op;

namespace {

LatentCode code(std::initializer_list<double> v) { return LatentCode{std::vector<double>(v)}; }

// The NV rule and BCC counter-rule from the ISIC case study, over k = 256.
Rule nv_rule() {
    return {{{7, Op::Greater, -1.01},
             {99, Op::LessEq, 0.07},
             {225, Op::Greater, -0.75},
             {255, Op::LessEq, -0.02},
             {238, Op::Greater, 0.15},
             {137, Op::LessEq, -0.14}},
            1};
}

}  // namespace

TEST_CASE("rule satisfaction on the case-study rules") {
    const LatentCode zero{std::vector<double>(256, 0.0)};
    const Rule nv = nv_rule();
    CHECK_FALSE(satisfies(nv, zero));
    CHECK(violated_conditions(nv, zero) == 3);

    LatentCode h = zero;
    h[7] = -2.0;
    const Rule bcc{{{7, Op::LessEq, -1.01}}, 2};
    CHECK(satisfies(bcc, h));
    CHECK_FALSE(satisfies(bcc, zero));

    CHECK(satisfies(Rule{{}, 0}, code({5.0})));
    CHECK_THROWS_AS(satisfies(bcc, code({0.0, 1.0})), std::out_of_range);
}

TEST_CASE("rule text matches the case-study format") {
    const ClassCatalog isic = ClassCatalog::isic2019();
    CHECK(to_text(nv_rule(), &isic) ==
          "{7 > -1.01, 99 <= 0.07, 225 > -0.75, 255 <= -0.02, 238 > 0.15, 137 <= -0.14} -> {class: NV}");
    CHECK(to_text(Rule{{{7, Op::LessEq, -1.01}}, 2}, &isic) == "{7 <= -1.01} -> {class: BCC}");
    CHECK(to_text(Rule{{}, 3}) == "{} -> {class: 3}");
    const auto j = to_json(nv_rule(), &isic);
    CHECK(j["class"] == "NV");
    CHECK(j["conditions"].size() == 6);
    CHECK(j["conditions"][0]["op"] == ">");
}

TEST_CASE("merging keeps the tightest interval per feature") {
    const Rule r{{{0, Op::LessEq, 2.0}, {1, Op::Greater, 0.0}, {0, Op::LessEq, 1.0}, {0, Op::Greater, -1.0},
                  {1, Op::Greater, 0.5}},
                 0};
    const Rule m = merge_conditions(r);
    const std::vector<Condition> want{{0, Op::Greater, -1.0}, {0, Op::LessEq, 1.0}, {1, Op::Greater, 0.5}};
    CHECK(m.conditions == want);
    CHECK(is_satisfiable(m));
    CHECK_FALSE(is_satisfiable(Rule{{{0, Op::LessEq, 0.0}, {0, Op::Greater, 0.0}}, 0}));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const LatentCode h = code({nd(rng), nd(rng)});
        CHECK(satisfies(m, h) == satisfies(r, h));
    }
}

TEST_CASE("separable clusters give a single split on feature 0") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 0.3);
    std::vector<LatentCode> codes;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        const int y = i % 2;
        codes.push_back(code({(y ? 3.0 : -3.0) + nd(rng), nd(rng), nd(rng)}));
        labels.push_back(y);
    }
    const SurrogateTree t = fit_tree(codes, labels);
    CHECK(t.depth() == 1);
    CHECK(t.nodes()[0].feature == 0);
    CHECK(fidelity(t, codes, labels) == 1.0);
}

TEST_CASE("an unlimited tree memorises distinct points") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    std::vector<LatentCode> codes;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        codes.push_back(code({nd(rng), nd(rng), nd(rng), nd(rng)}));
        labels.push_back(static_cast<int>(rng() % 3));
    }
    const auto memo = fit_tree(codes, labels, {64, 1});
    CHECK(fidelity(memo, codes, labels) == 1.0);
}

TEST_CASE("a constant tree on a 60/40 split has fidelity 0.6") {
    std::vector<LatentCode> codes;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        codes.push_back(code({static_cast<double>(i)}));
        labels.push_back(i < 6 ? 0 : 1);
    }
    const auto t = fit_tree(codes, labels, {0, 2});
    CHECK(t.depth() == 0);
    CHECK(fidelity(t, codes, labels) == doctest::Approx(0.6));
    const Rule r = extract_rule(t, codes[0]);
    CHECK(r.conditions.empty());
    CHECK(r.consequent == 0);
    CHECK(rank_counterfactuals(t, codes[0]).empty());
}

TEST_CASE("fidelity agrees with a per-instance loop") {
    std::mt19937_64 rng(7);
    std::vector<LatentCode> codes;
    const auto t = random_tree(rng, 3, 50, 3, 2, &codes);
    std::vector<int> labels;
    for (std::size_t i = 0; i < codes.size(); ++i) labels.push_back(static_cast<int>(rng() % 3));
    int agree = 0;
    for (std::size_t i = 0; i < codes.size(); ++i) agree += t.predict(codes[i]) == labels[i];
    CHECK(fidelity(t, codes, labels) == doctest::Approx(agree / 50.0));
    CHECK_THROWS(fidelity(t, codes, std::vector<int>{1}));
}

TEST_CASE("boundary values route to the lower branch") {
    const std::vector<LatentCode> codes{code({0.0}), code({1.0}), code({2.0}), code({3.0})};
    const std::vector<int> labels{0, 0, 1, 1};
    const auto t = fit_tree(codes, labels);
    REQUIRE(t.depth() == 1);
    CHECK(t.nodes()[0].threshold == doctest::Approx(1.5));
    CHECK(t.predict(code({1.5})) == 0);
    CHECK(t.predict(code({std::nextafter(1.5, 2.0)})) == 1);
}

TEST_CASE("equal impurity prefers the lower feature and threshold") {
    // Both features separate the labels perfectly.
    const std::vector<LatentCode> codes{code({0.0, 10.0}), code({1.0, 11.0}), code({2.0, 12.0}), code({3.0, 13.0})};
    const auto t = fit_tree(codes, std::vector<int>{0, 0, 1, 1});
    CHECK(t.nodes()[0].feature == 0);
}

TEST_CASE("depth-one tree has the complementary counter-rule") {
    const std::vector<LatentCode> codes{code({-2.0}), code({-1.0}), code({1.0}), code({2.0})};
    const auto t = fit_tree(codes, std::vector<int>{0, 0, 1, 1});
    const auto cf = extract_counterfactual_rules(t, code({-1.5}), 5);
    REQUIRE(cf.size() == 1);
    CHECK(cf[0].conditions == std::vector<Condition>{{0, Op::Greater, 0.0}});
    CHECK(cf[0].consequent == 1);
    const Rule r = extract_rule(t, code({-1.5}));
    CHECK(r.conditions == std::vector<Condition>{{0, Op::LessEq, 0.0}});
}

TEST_CASE("tree rules are consistent, partition the space and imply their class") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 1.5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_tree(rng, 3, 40, 3, 4);
        const auto leaves = t.leaves();
        for (int p = 0; p < 20; ++p) {
            const LatentCode z = code({nd(rng), nd(rng), nd(rng)});
            const Rule r = extract_rule(t, z);
            CHECK(satisfies(r, z));
            CHECK(r.consequent == t.predict(z));
            int matched = 0;
            for (int leaf : leaves) matched += satisfies(t.path_rule(leaf), z);
            CHECK(matched == 1);
        }
        const LatentCode z = code({nd(rng), nd(rng), nd(rng)});
        for (const auto& cf : rank_counterfactuals(t, z)) {
            CHECK(is_satisfiable(cf.rule));
            CHECK(cf.rule.consequent != t.predict(z));
            for (int p = 0; p < 20; ++p) {
                const LatentCode h = code({nd(rng), nd(rng), nd(rng)});
                if (satisfies(cf.rule, h)) CHECK(t.predict(h) == cf.rule.consequent);
            }
        }
    }
}

TEST_CASE("counterfactual ranking matches exhaustive leaf enumeration") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = random_tree(rng, 4, 50, 3, 4);
        if (t.leaves().size() > 15) continue;
        const LatentCode z = code({nd(rng), nd(rng), nd(rng), nd(rng)});
        std::vector<int> got;
        for (const auto& c : rank_counterfactuals(t, z)) got.push_back(c.leaf);
        CHECK(got == counterfactual_order_oracle(t, z));
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("scaling the codes scales the thresholds") {
    std::mt19937_64 rng(13);
    std::vector<LatentCode> codes;
    const auto t = random_tree(rng, 3, 40, 2, 3, &codes);
    std::vector<int> labels;
    std::mt19937_64 lr(2);
    for (std::size_t i = 0; i < codes.size(); ++i) labels.push_back(static_cast<int>(lr() % 2));
    const auto a = fit_tree(codes, labels);
    auto scaled = codes;
    for (auto& c : scaled)
        for (double& v : c.values) v *= 4.0;
    const auto b = fit_tree(scaled, labels);
    REQUIRE(a.nodes().size() == b.nodes().size());
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        CHECK(a.nodes()[i].feature == b.nodes()[i].feature);
        CHECK(b.nodes()[i].threshold == doctest::Approx(4.0 * a.nodes()[i].threshold));
    }
}

TEST_CASE("surrogate fitting on a neighborhood uses valid instances only") {
    Neighborhood n;
    n.center = code({0.0});
    n.center_label = 0;
    for (int i = 0; i < 10; ++i) {
        LatentInstance inst;
        inst.code = code({static_cast<double>(i)});
        inst.label = i < 5 ? 0 : 1;
        inst.valid = i != 9;
        n.instances.push_back(inst);
    }
    n.instances[9].label = 0;  // invalid and off-pattern
    const auto t = fit_surrogate(n);
    CHECK(fidelity(t, n) == 1.0);
    for (auto& inst : n.instances) inst.label = 0;
    CHECK_THROWS_AS(fit_surrogate(n), DegenerateLocality);
}

TEST_CASE("ranking against a reference label includes the own leaf when classes differ") {
    const std::vector<LatentCode> codes{code({-2.0}), code({-1.0}), code({1.0}), code({2.0})};
    const auto t = fit_tree(codes, std::vector<int>{0, 0, 1, 1});
    const LatentCode z = code({-1.5});
    CHECK(rank_counterfactuals(t, z, 0).size() == 1);
    const auto other = rank_counterfactuals(t, z, 1);
    REQUIRE(other.size() == 1);
    CHECK(other[0].violated == 0);
    CHECK(other[0].rule.consequent == 0);
    CHECK(rank_counterfactuals(t, z, 5).size() == 2);
}
