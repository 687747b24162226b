#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "latentlens/conv_block.hpp"
#include "latentlens/progressive.hpp"

using namespace latentlens;
using namespace latentlens::testing;

namespace {

ProgressiveHyper tiny_hyper() {
    ProgressiveHyper h;
    h.latent_dim = 4;
    h.width_step = 8;
    h.filter_base = 4;
    h.filter_cap = 8;
    h.epochs = {1};
    h.batch_size = 16;
    h.mbd = {4, 3};
    h.seed = 11;
    return h;
}

std::map<std::string, Tensor> by_name(AaeModel& m) {
    std::map<std::string, Tensor> out;
    for (auto* p : m.all_parameters()) out.emplace(p->name, p->value);
    return out;
}

}  // namespace

TEST_CASE("stage plans double the resolution") {
    ProgressiveHyper h = tiny_hyper();
    h.epochs = {8, 6, 4};
    h.width_step = 32;
    const StagePlan plan = stage_plan(7, 28, h);
    REQUIRE(plan.stages.size() == 3);
    CHECK(plan.stages[0].resolution == 7);
    CHECK(plan.stages[1].resolution == 14);
    CHECK(plan.stages[2].resolution == 28);
    CHECK(plan.stages[2].epochs == 4);
    CHECK(plan.stages[1].disc_width == 64);
    CHECK(plan.stages[2].block_filters.size() == 3);
    CHECK(plan.stages[2].block_filters.back() == 4);

    const StagePlan one = stage_plan(7, 7, h);
    REQUIRE(one.stages.size() == 1);
    CHECK(one.stages[0].resolution == 7);

    h.epochs = {5};
    CHECK(stage_plan(7, 28, h).stages[2].epochs == 5);

    CHECK_THROWS_AS(stage_plan(7, 20, h), std::invalid_argument);
    CHECK_THROWS_AS(stage_plan(14, 7, h), std::invalid_argument);
    h.batch_size = 8;
    CHECK_THROWS_AS(stage_plan(7, 14, h), std::invalid_argument);
}

TEST_CASE("growing a stage copies shared blocks bit for bit") {
    const ProgressiveHyper h = tiny_hyper();
    const StagePlan plan = stage_plan(4, 16, h);
    AaeModel s1 = build_stage(plan, plan.stages[0], nullptr, h);
    AaeModel s2 = build_stage(plan, plan.stages[1], &s1, h);
    AaeModel s3 = build_stage(plan, plan.stages[2], &s2, h);
    CHECK(s1.parameter_count() < s2.parameter_count());
    CHECK(s2.parameter_count() < s3.parameter_count());

    for (auto [prev, next] : {std::pair{&s1, &s2}, std::pair{&s2, &s3}}) {
        const auto names = transferred_parameter_names(*next);
        REQUIRE_FALSE(names.empty());
        const auto a = by_name(*prev), b = by_name(*next);
        for (const auto& n : names) {
            INFO(n);
            REQUIRE(a.count(n) == 1);
            CHECK(a.at(n).storage() == b.at(n).storage());
        }
        // Only encoder and decoder blocks travel; the discriminator is fresh.
        for (const auto& n : names) CHECK(n.rfind("discriminator.", 0) != 0);
    }

    CHECK_THROWS_AS(build_stage(plan, plan.stages[1], nullptr, h), std::invalid_argument);
    CHECK_THROWS_AS(build_stage(plan, plan.stages[2], &s1, h), std::invalid_argument);
}

TEST_CASE("conv blocks validate their filters") {
    CHECK_NOTHROW(conv_block(BlockDirection::Encode, 3, kMinBlockFilters));
    CHECK_NOTHROW(conv_block(BlockDirection::Decode, 3, kMaxBlockFilters));
    CHECK_THROWS_AS(conv_block(BlockDirection::Encode, 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(conv_block(BlockDirection::Encode, 3, kMaxBlockFilters + 1), std::invalid_argument);
    CHECK_THROWS_AS(conv_block(BlockDirection::Encode, 0, 4), std::invalid_argument);
}

TEST_CASE("pairwise distance is the mean RMS difference") {
    Image a(2, 2, 1, 0.0), b(2, 2, 1, 0.5), c(2, 2, 1, 1.0);
    std::vector<Image> imgs{a, b, c};
    CHECK(mean_pairwise_distance(imgs) == doctest::Approx((0.5 + 1.0 + 0.5) / 3.0));
    CHECK_THROWS(mean_pairwise_distance(std::vector<Image>{a}));
}

TEST_CASE("progressive training runs every stage and logs metrics") {
    const Dataset ds = make_blob_dataset(32, 16, 2);
    const ProgressiveHyper h = tiny_hyper();
    const StagePlan plan = stage_plan(4, 16, h);
    const auto dir = temp_dir("progressive");
    std::ostringstream metrics;
    ProgressiveOptions opts;
    opts.metrics = &metrics;
    opts.checkpoint_dir = dir;
    opts.diversity_samples = 8;
    const ProgressiveRun run = train_progressive(ds, plan, h, opts);
    CHECK_FALSE(run.halted);
    REQUIRE(run.stages.size() == 3);
    CHECK(run.model.resolution() == 16);
    CHECK_FALSE(run.stages[0].transfer_rmse.has_value());
    CHECK(run.stages[1].transfer_rmse.has_value());
    for (const auto& st : run.stages) {
        CHECK(st.final_rmse > 0.0);
        CHECK(st.diversity > 0.0);
        CHECK(st.recon_loss.size() == 1);
    }
    CHECK(std::filesystem::exists(dir / "stage1_4.ckpt"));
    CHECK(std::filesystem::exists(dir / "stage3_16.ckpt"));

    std::istringstream lines(metrics.str());
    std::string line;
    int records = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("stage"));
        ++records;
    }
    CHECK(records > 0);
    std::filesystem::remove_all(dir);
}
