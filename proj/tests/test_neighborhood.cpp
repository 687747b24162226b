#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "latentlens/neighborhood.hpp"

using namespace latentlens;
using namespace latentlens::testing;

namespace {

GeneticParams small_params() {
    GeneticParams p;
    p.population = 24;
    p.generations = 6;
    p.validity_threshold = 1e-6;
    p.mutation_scale = 1.0;
    return p;
}

struct Setup {
    AaeModel model{tiny_aae_config(4, 8, 13)};
    BandBox bb{8, {median_decoded_mean(model)}};
    LatentCode z{{0.2, -0.4, 0.1, 0.3}};
};

}  // namespace

TEST_CASE("fitness values follow the indicator plus proximity form") {
    CHECK(fitness_value(Objective::SameClass, true, 0.3, false) == doctest::Approx(1.7));
    CHECK(fitness_value(Objective::SameClass, false, 0.3, false) == doctest::Approx(0.7));
    CHECK(fitness_value(Objective::OtherClass, false, 0.3, false) == doctest::Approx(1.7));
    CHECK(fitness_value(Objective::OtherClass, true, 0.3, false) == doctest::Approx(0.7));
    // The centre itself is penalised.
    CHECK(fitness_value(Objective::SameClass, true, 0.0, true) == doctest::Approx(1.0));
    CHECK(fitness_value(Objective::OtherClass, true, 0.0, true) == doctest::Approx(0.0));
}

TEST_CASE("normalized distance divides by the root of the dimension") {
    const LatentCode a{{0, 0, 0, 0}}, b{{1, 1, 1, 1}};
    CHECK(normalized_distance(a, b) == doctest::Approx(1.0));
    CHECK(normalized_distance(a, a) == 0.0);
    CHECK_THROWS(normalized_distance(a, LatentCode{{1, 2}}));
}

TEST_CASE("fitness through the models matches the closed form") {
    Setup s;
    const LatentCode h{{0.5, -0.4, 0.1, 0.3}};
    const int lz = s.bb.predict(s.model.decode(s.z)).label;
    const int lh = s.bb.predict(s.model.decode(h)).label;
    const double d = normalized_distance(h, s.z);
    CHECK(fitness_eq(h, s.z, s.bb, s.model) == doctest::Approx((lz == lh ? 1.0 : 0.0) + 1.0 - d));
    CHECK(fitness_neq(h, s.z, s.bb, s.model) == doctest::Approx((lz != lh ? 1.0 : 0.0) + 1.0 - d));
    CHECK(fitness_eq(s.z, s.z, s.bb, s.model) == doctest::Approx(1.0));
}

TEST_CASE("validity threshold zero accepts everything and one accepts nothing") {
    Setup s;
    std::mt19937_64 rng(3);
    for (const auto& h : sample_prior(PriorSpec::standard_normal(4), 20, rng)) {
        CHECK(validate_latent(s.model, h, 0.0));
        CHECK_FALSE(validate_latent(s.model, h, 1.0));
    }
}

TEST_CASE("batch labelling equals one-at-a-time labelling") {
    Setup s;
    std::mt19937_64 rng(4);
    const auto codes = sample_prior(PriorSpec::standard_normal(4), 9, rng);
    const auto batch = label_instances(s.bb, s.model, codes, 0.5);
    const auto scores = validity_scores(s.model, codes);
    REQUIRE(batch.size() == codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const auto one = label_instance(s.bb, s.model, codes[i], 0.5);
        CHECK(batch[i].label == one.label);
        CHECK(batch[i].valid == one.valid);
        CHECK(batch[i].validity == doctest::Approx(one.validity).epsilon(1e-12));
        CHECK(scores[i] == doctest::Approx(one.validity).epsilon(1e-12));
        REQUIRE(batch[i].decoded.same_shape(one.decoded));
        for (std::size_t j = 0; j < one.decoded.size(); ++j)
            CHECK(batch[i].decoded.pixels[j] == doctest::Approx(one.decoded.pixels[j]).epsilon(1e-12));
    }
}

TEST_CASE("neighborhood partitions are exhaustive and disjoint") {
    Setup s;
    const Neighborhood n = generate_neighborhood(s.z, s.bb, s.model, small_params(), 42);
    CHECK(n.center == s.z);
    CHECK(n.center_label == s.bb.predict(s.model.decode(s.z)).label);
    CHECK(n.instances.size() == 24);
    const auto same = n.same_class(), other = n.other_class();
    CHECK_FALSE(same.empty());
    CHECK_FALSE(other.empty());
    CHECK(same.size() + other.size() == n.valid_count());
    std::set<std::size_t> all(same.begin(), same.end());
    for (auto i : other) CHECK(all.insert(i).second);
    for (auto i : same) CHECK(n.instances[i].label == n.center_label);
    for (auto i : other) CHECK(n.instances[i].label != n.center_label);
    for (const auto& inst : n.instances) {
        for (double v : inst.code.values) CHECK(std::isfinite(v));
        CHECK(inst.label == s.bb.predict(inst.decoded).label);
    }
}

TEST_CASE("neighborhood generation is deterministic in the seed") {
    Setup s;
    const auto a = to_json(generate_neighborhood(s.z, s.bb, s.model, small_params(), 7)).dump();
    const auto b = to_json(generate_neighborhood(s.z, s.bb, s.model, small_params(), 7)).dump();
    const auto c = to_json(generate_neighborhood(s.z, s.bb, s.model, small_params(), 8)).dump();
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("elite fitness never decreases across generations") {
    Setup s;
    for (auto obj : {Objective::SameClass, Objective::OtherClass}) {
        const auto trace = elite_fitness_trace(s.z, s.bb, s.model, small_params(), obj, 5);
        REQUIRE(trace.size() >= 2);
        for (std::size_t g = 1; g < trace.size(); ++g) CHECK(trace[g] >= trace[g - 1]);
    }
}

TEST_CASE("zero mutation scale cannot leave the centre") {
    Setup s;
    GeneticParams p = small_params();
    p.mutation_scale = 0.0;
    try {
        generate_neighborhood(s.z, s.bb, s.model, p, 1);
        FAIL("expected DegenerateLocality");
    } catch (const DegenerateLocality& e) {
        CHECK(e.neighborhood.retries == p.max_retries);
        CHECK(e.neighborhood.other_class().empty());
    }
}

TEST_CASE("genetic parameters are validated") {
    GeneticParams p;
    CHECK_NOTHROW(p.validate());
    p.population = 1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.mutation_prob = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.validity_threshold = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.validity_threshold = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("random neighborhood baseline is labelled like the search") {
    Setup s;
    const Neighborhood n = generate_random_neighborhood(s.z, s.bb, s.model, 30, 1.0, 0.0, 3);
    CHECK(n.instances.size() == 30);
    CHECK(n.valid_count() == 30);
    for (const auto& inst : n.instances) CHECK(inst.label == s.bb.predict(inst.decoded).label);
}
