#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "latentlens/explainer.hpp"
#include "oracles.hpp"

using namespace latentlens;
using namespace latentlens::testing;
using Op = Condition::Op;

namespace {

Image row(std::initializer_list<double> v) {
    Image img(1, static_cast<int>(v.size()), 1);
    img.pixels = v;
    return img;
}

ExplainConfig small_explain_config() {
    ExplainConfig cfg;
    cfg.genetic.population = 24;
    cfg.genetic.generations = 5;
    cfg.genetic.mutation_scale = 1.0;
    cfg.genetic.validity_threshold = 0.05;
    cfg.sampling.validity_threshold = 0.05;
    cfg.budget_factor = 40;
    return cfg;
}

struct Setup {
    AaeModel model{tiny_aae_config(4, 8, 13)};
    BandBox bb{8, {median_decoded_mean(model)}};
    Image x = model.decode(LatentCode{{0.2, -0.4, 0.1, 0.3}});
};

}  // namespace

TEST_CASE("saliency is the per-pixel median difference") {
    const Image x = row({1.0, 0.5});
    const std::vector<Image> ex{row({0.8, 0.5}), row({0.6, 0.4}), row({0.9, 0.1})};
    const SaliencyMap s = saliency_map(x, ex);
    REQUIRE(s.values.size() == 2);
    CHECK(s.values[0] == doctest::Approx(0.2));
    CHECK(s.values[1] == doctest::Approx(0.1));

    CHECK(saliency_map(x, std::vector<Image>{x}).values == std::vector<double>{0.0, 0.0});
    const auto single = saliency_map(x, std::vector<Image>{ex[2]});
    CHECK(single.values[0] == doctest::Approx(0.1));
    CHECK(single.values[1] == doctest::Approx(0.4));

    // Even count: mean of the two central differences.
    const auto even = saliency_map(x, std::vector<Image>{ex[0], ex[1]});
    CHECK(even.values[0] == doctest::Approx(0.3));
    CHECK(even.values[1] == doctest::Approx(0.05));

    CHECK_THROWS(saliency_map(x, std::vector<Image>{}));
    CHECK_THROWS_AS(saliency_map(x, std::vector<Image>{row({1.0})}), ShapeError);
}

TEST_CASE("saliency matches a sort-based oracle and is antisymmetric") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 6);
        const Image x = random_image(5, 4, 3, rng);
        std::vector<Image> ex;
        std::vector<std::vector<double>> raw;
        for (int i = 0; i < n; ++i) {
            ex.push_back(random_image(5, 4, 3, rng));
            raw.push_back(ex.back().pixels);
        }
        const SaliencyMap s = saliency_map(x, ex);
        CHECK(s.values == saliency_oracle(x.pixels, raw));
        REQUIRE(s.display.size() == 20);
        for (int p = 0; p < 20; ++p) {
            const double mean = (s.values[p * 3] + s.values[p * 3 + 1] + s.values[p * 3 + 2]) / 3.0;
            CHECK(s.display[p] == doctest::Approx(mean).epsilon(1e-12));
        }
        const auto a = saliency_map(x, std::vector<Image>{ex[0]});
        const auto b = saliency_map(ex[0], std::vector<Image>{x});
        for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == -b.values[i]);
    }
}

TEST_CASE("saliency overlay tints by sign") {
    Image x(1, 3, 3, 0.5);
    SaliencyMap s;
    s.height = 1;
    s.width = 3;
    s.channels = 3;
    s.values = {0.4, 0.4, 0.4, 0.0, 0.0, 0.0, -0.4, -0.4, -0.4};
    s.display = {0.4, 0.0, -0.4};
    const Image out = render_saliency(x, s);
    CHECK(out.at(0, 1, 0) == doctest::Approx(out.at(0, 1, 1)));  // neutral stays grey
    CHECK(out.at(0, 0, 0) > out.at(0, 0, 1));                    // brown: red over green
    CHECK(out.at(0, 2, 1) > out.at(0, 2, 0));                    // green: green over red
}

TEST_CASE("rule-constrained draws stay inside the rule") {
    const Rule r{{{0, Op::Greater, 0.5}, {0, Op::LessEq, 0.7}, {2, Op::LessEq, -3.0}}, 0};
    const LatentCode z{{0.0, 0.0, 0.0, 0.0}};
    for (std::uint64_t d = 0; d < 500; ++d) {
        const LatentCode h = sample_in_rule(r, z, 1.0, 9, d);
        CHECK(satisfies(r, h));
        for (double v : h.values) CHECK(std::isfinite(v));
    }
    CHECK(sample_in_rule(r, z, 1.0, 9, 3) == sample_in_rule(r, z, 1.0, 9, 3));
    CHECK_FALSE(sample_in_rule(r, z, 1.0, 9, 3) == sample_in_rule(r, z, 1.0, 9, 4));
}

TEST_CASE("exemplars pass the rule, validity and black-box filters") {
    Setup s;
    const LatentCode z = s.model.encode(s.x);
    const int label = s.bb.predict(s.x).label;
    const Rule r{{{0, Op::LessEq, 5.0}}, label};
    SamplingConfig cfg;
    cfg.validity_threshold = 0.3;
    const auto res = generate_exemplars(r, z, s.model, s.bb, 4, 200, cfg, 3);
    CHECK(res.items.size() <= 4);
    if (res.items.size() < 4) CHECK_FALSE(res.diagnostics.empty());
    for (std::size_t i = 0; i < res.items.size(); ++i) {
        const auto& e = res.items[i];
        CHECK(satisfies(r, e.code));
        CHECK(validate_latent(s.model, e.code, 0.3));
        CHECK(s.bb.predict(e.image).label == label);
        if (i) CHECK(res.items[i - 1].distance <= e.distance);
    }
    const auto again = generate_exemplars(r, z, s.model, s.bb, 4, 200, cfg, 3);
    REQUIRE(again.items.size() == res.items.size());
    for (std::size_t i = 0; i < res.items.size(); ++i) CHECK(again.items[i].code == res.items[i].code);

    SamplingConfig threaded = cfg;
    threaded.threads = 3;
    const auto par = generate_exemplars(r, z, s.model, s.bb, 4, 200, threaded, 3);
    REQUIRE(par.items.size() == res.items.size());
    for (std::size_t i = 0; i < res.items.size(); ++i) {
        CHECK(par.items[i].draw == res.items[i].draw);
        CHECK(par.items[i].image.pixels == res.items[i].image.pixels);
    }

    // An impossible class yields nothing, with a diagnostic.
    const Rule bad{{}, 7};
    const auto none = generate_exemplars(bad, z, s.model, s.bb, 2, 50, cfg, 3);
    CHECK(none.items.empty());
    CHECK_FALSE(none.diagnostics.empty());
}

TEST_CASE("counterexemplars skip rules for the excluded class") {
    Setup s;
    const LatentCode z = s.model.encode(s.x);
    const std::vector<Rule> rules{Rule{{}, 0}, Rule{{}, 1}};
    SamplingConfig cfg;
    cfg.validity_threshold = 0.05;
    const auto res = generate_counterexemplars(rules, z, s.model, s.bb, 2, 100, cfg, 5, 0);
    for (const auto& e : res.items) {
        CHECK(e.rule_index == 1);
        CHECK(e.label == 1);
    }
    CHECK_FALSE(res.diagnostics.empty());
}

TEST_CASE("neighborhood statistics count valid instances") {
    Neighborhood n;
    for (int i = 0; i < 6; ++i) {
        LatentInstance inst;
        inst.label = i % 3;
        inst.valid = i != 5;
        n.instances.push_back(inst);
    }
    const auto stats = neighborhood_stats(n);
    CHECK(stats.at(0) == 2);
    CHECK(stats.at(1) == 2);
    CHECK(stats.at(2) == 1);
}

TEST_CASE("explain produces a consistent, deterministic explanation") {
    Setup s;
    const ExplainConfig cfg = small_explain_config();
    const Explanation e = explain(s.x, s.bb, s.model, cfg, 17);
    CHECK(e.label == s.bb.predict(s.x).label);
    CHECK(check_explanation(e, s.bb, s.model, cfg.sampling.validity_threshold).empty());
    int total = 0;
    for (const auto& [_, c] : e.neighborhood_stats) total += c;
    CHECK(static_cast<std::size_t>(total) == e.neighborhood_size);
    for (const auto& r : e.counter_rules) CHECK(r.consequent != e.label);
    REQUIRE_FALSE(e.exemplars.empty());
    CHECK_FALSE(e.counterexemplars.empty());
    CHECK(e.saliency.has_value());

    ArtifactStore store;
    const auto j = to_json(e, store);
    CHECK(validate_explanation_json(j).empty());
    const Explanation f = explain(s.x, s.bb, s.model, cfg, 17);
    ArtifactStore store2;
    CHECK(to_json(f, store2).dump() == j.dump());

    SUBCASE("refinement appends exemplars") {
        Explanation g = e;
        const auto before = g.exemplars.size();
        add_exemplars(g, s.bb, s.model, cfg, 2, 99);
        CHECK(g.exemplars.size() >= before);
        CHECK(check_explanation(g, s.bb, s.model, cfg.sampling.validity_threshold).empty());
        CHECK_FALSE(add_counterexemplars(g, s.bb, s.model, cfg, 1, 42, 99));
    }
}

TEST_CASE("schema validation reports structural problems") {
    Setup s;
    const Explanation e = explain(s.x, s.bb, s.model, small_explain_config(), 3);
    ArtifactStore store;
    auto j = to_json(e, store);
    REQUIRE(validate_explanation_json(j).empty());
    auto missing = j;
    missing.erase("rule");
    CHECK_FALSE(validate_explanation_json(missing).empty());
    auto wrong = j;
    wrong["label"] = "x";
    CHECK_FALSE(validate_explanation_json(wrong).empty());
}

TEST_CASE("artifacts are addressed by their sha-256") {
    const std::string abc = "abc";
    CHECK(sha256_hex(std::span(reinterpret_cast<const unsigned char*>(abc.data()), abc.size())) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = temp_dir("artifacts");
    ArtifactStore disk(dir);
    const Image img(2, 2, 3, 0.5);
    const std::string ref = disk.put_image(img);
    CHECK(ref.size() == 64);
    CHECK(disk.put_image(img) == ref);
    ArtifactStore reopened(dir);
    REQUIRE(reopened.get(ref).has_value());
    CHECK(decode_image(*reopened.get(ref)).same_shape(img));
    CHECK_FALSE(reopened.get("../etc/passwd").has_value());
    CHECK_FALSE(reopened.get(std::string(64, '0')).has_value());
    std::filesystem::remove_all(dir);
}
