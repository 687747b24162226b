#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlens/aae.hpp"
#include "latentlens/dataset.hpp"

namespace latentlens {

struct StageConfig {
    int stage_index = 1;  // 1-based
    int resolution = 7;
    int blocks = 1;
    std::vector<int> block_filters;  // per level, coarsest first
    int disc_width = 500;
    int epochs = 1;
    int batch_size = 32;
};

struct StagePlan {
    int base_res = 7;
    int target_res = 7;
    std::vector<StageConfig> stages;
};

struct ProgressiveHyper {
    int latent_dim = 256;
    int channels = 3;
    // Discriminator width grows by this much per stage (500 at full scale).
    int width_step = 500;
    int filter_base = 16;
    int filter_cap = 128;
    // One entry per stage; the last entry repeats for longer plans.
    std::vector<int> epochs{10};
    int batch_size = 32;
    int batch_min = 16;
    int batch_max = 64;
    int conv_stride = 1;
    double bn_momentum = 0.95;
    nn::MbdConfig mbd;
    bool minibatch_discrimination = true;
    AaeHyper optim;
    std::uint64_t seed = 1;
};

// Doubling resolution schedule from base_res to target_res. Throws
// std::invalid_argument unless target_res == base_res * 2^m.
StagePlan stage_plan(int base_res, int target_res, const ProgressiveHyper& hyper);

AaeConfig stage_aae_config(const StagePlan& plan, const StageConfig& stage, const ProgressiveHyper& hyper);

// Builds the stage-s network. Blocks shared with `prev` (levels 1..s-1 plus
// the latent projections) are copied; the new block, the input/output
// adapters and the discriminator start fresh.
AaeModel build_stage(const StagePlan& plan, const StageConfig& stage, const AaeModel* prev,
                     const ProgressiveHyper& hyper);

// Names of the parameters build_stage copies from the previous stage.
std::vector<std::string> transferred_parameter_names(const AaeModel& next);

// Mean pairwise RMS pixel distance.
double mean_pairwise_distance(std::span<const Image> images);
// Mean pairwise distance among decodes of `count` prior samples.
double diversity_metric(const AaeModel& m, int count, std::mt19937_64& rng);

struct StageMetrics {
    int stage = 0;
    int resolution = 0;
    // RMSE right after weight transfer, outputs downsampled to the previous resolution.
    std::optional<double> transfer_rmse;
    double final_rmse = 0.0;
    double diversity = 0.0;
    std::vector<double> recon_loss, d_loss, g_loss;  // per epoch means
};

struct ProgressiveRun {
    AaeModel model;
    std::vector<StageMetrics> stages;
    bool halted = false;
    std::string halt_reason;
};

struct ProgressiveOptions {
    // Line-delimited JSON metric records; may be null.
    std::ostream* metrics = nullptr;
    // Per-stage checkpoints "stage<s>_<res>.ckpt" and "last_good.ckpt" on divergence.
    std::optional<std::filesystem::path> checkpoint_dir;
    // Resize images to each stage resolution (otherwise they must already match the target).
    bool resize_on_ingest = true;
    int diversity_samples = 64;
};

ProgressiveRun train_progressive(const Dataset& dataset, const StagePlan& plan, const ProgressiveHyper& hyper,
                                 const ProgressiveOptions& options = {});

nlohmann::json to_json(const StagePlan& plan);

}  // namespace latentlens
