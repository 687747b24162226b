#include "latentlens/progressive.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace latentlens {

StagePlan stage_plan(int base_res, int target_res, const ProgressiveHyper& hyper) {
    if (base_res < 1 || target_res < base_res)
        throw std::invalid_argument("stage plan needs 1 <= base_res <= target_res");
    int m = 0;
    while ((base_res << m) < target_res) ++m;
    if ((base_res << m) != target_res)
        throw std::invalid_argument("target resolution " + std::to_string(target_res) +
                                    " is not base resolution " + std::to_string(base_res) + " times a power of two");
    if (hyper.batch_size < hyper.batch_min || hyper.batch_size > hyper.batch_max)
        throw std::invalid_argument("batch size " + std::to_string(hyper.batch_size) + " outside [" +
                                    std::to_string(hyper.batch_min) + ", " + std::to_string(hyper.batch_max) + "]");
    if (hyper.epochs.empty()) throw std::invalid_argument("epoch schedule is empty");
    StagePlan plan{base_res, target_res, {}};
    const FilterSchedule fs{hyper.filter_base, hyper.filter_cap, m + 1};
    for (int s = 1; s <= m + 1; ++s) {
        StageConfig st;
        st.stage_index = s;
        st.resolution = base_res << (s - 1);
        st.blocks = s;
        for (int level = 1; level <= s; ++level) st.block_filters.push_back(fs.at(level));
        st.disc_width = hyper.width_step * s;
        st.epochs = hyper.epochs[std::min<std::size_t>(static_cast<std::size_t>(s - 1), hyper.epochs.size() - 1)];
        st.batch_size = hyper.batch_size;
        plan.stages.push_back(std::move(st));
    }
    return plan;
}

AaeConfig stage_aae_config(const StagePlan& plan, const StageConfig& stage, const ProgressiveHyper& hyper) {
    AaeConfig cfg;
    cfg.latent_dim = hyper.latent_dim;
    cfg.channels = hyper.channels;
    cfg.base_res = plan.base_res;
    cfg.stage = stage.stage_index;
    cfg.filters = {hyper.filter_base, hyper.filter_cap, static_cast<int>(plan.stages.size())};
    cfg.conv_stride = hyper.conv_stride;
    cfg.bn_momentum = hyper.bn_momentum;
    cfg.disc_width = stage.disc_width;
    cfg.mbd = hyper.mbd;
    cfg.minibatch_discrimination = hyper.minibatch_discrimination;
    cfg.seed = hyper.seed;
    return cfg;
}

std::vector<std::string> transferred_parameter_names(const AaeModel& next) {
    const int s = next.stage();
    std::vector<std::string> prefixes{"encoder.to_latent.", "decoder.from_latent."};
    for (int level = 1; level < s; ++level) {
        prefixes.push_back("encoder.level" + std::to_string(level) + ".");
        prefixes.push_back("decoder.level" + std::to_string(level) + ".");
    }
    std::vector<std::string> out;
    auto& mutable_next = const_cast<AaeModel&>(next);
    for (auto* p : mutable_next.autoencoder_parameters())
        for (const auto& pre : prefixes)
            if (p->name.rfind(pre, 0) == 0) {
                out.push_back(p->name);
                break;
            }
    return out;
}

AaeModel build_stage(const StagePlan& plan, const StageConfig& stage, const AaeModel* prev,
                     const ProgressiveHyper& hyper) {
    if ((prev == nullptr) != (stage.stage_index == 1))
        throw std::invalid_argument("a previous model is required exactly when stage_index > 1");
    if (prev && prev->stage() != stage.stage_index - 1)
        throw std::invalid_argument("previous model is stage " + std::to_string(prev->stage()) + ", expected " +
                                    std::to_string(stage.stage_index - 1));
    AaeModel next(stage_aae_config(plan, stage, hyper));
    if (!prev) return next;
    if (prev->latent_dim() != next.latent_dim()) throw std::invalid_argument("latent dimension must stay fixed");

    const auto names = transferred_parameter_names(next);
    auto& src = const_cast<AaeModel&>(*prev);
    for (auto* dst : next.autoencoder_parameters()) {
        if (std::find(names.begin(), names.end(), dst->name) == names.end()) continue;
        bool copied = false;
        for (auto* p : src.autoencoder_parameters())
            if (p->name == dst->name) {
                if (p->value.shape() != dst->value.shape())
                    throw ShapeError("cannot transfer " + dst->name + ": shape changed between stages");
                dst->value = p->value;
                copied = true;
                break;
            }
        if (!copied) throw std::runtime_error("previous stage lacks parameter " + dst->name);
    }
    return next;
}

double mean_pairwise_distance(std::span<const Image> images) {
    if (images.size() < 2) throw std::invalid_argument("pairwise distance needs at least two images");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        for (std::size_t j = i + 1; j < images.size(); ++j) {
            if (!images[i].same_shape(images[j])) throw ShapeError("pairwise distance: image shapes differ");
            double se = 0.0;
            for (std::size_t p = 0; p < images[i].size(); ++p) {
                const double d = images[i].pixels[p] - images[j].pixels[p];
                se += d * d;
            }
            sum += std::sqrt(se / static_cast<double>(images[i].size()));
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double diversity_metric(const AaeModel& m, int count, std::mt19937_64& rng) {
    if (count < 2) throw std::invalid_argument("diversity_metric needs count >= 2");
    const auto codes = sample_prior(PriorSpec::standard_normal(m.latent_dim()), count, rng);
    const auto images = m.decode(codes);
    return mean_pairwise_distance(images);
}

nlohmann::json to_json(const StagePlan& plan) {
    nlohmann::json j;
    j["base_res"] = plan.base_res;
    j["target_res"] = plan.target_res;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : plan.stages)
        j["stages"].push_back({{"stage", s.stage_index},
                               {"resolution", s.resolution},
                               {"blocks", s.blocks},
                               {"block_filters", s.block_filters},
                               {"disc_width", s.disc_width},
                               {"epochs", s.epochs},
                               {"batch_size", s.batch_size}});
    return j;
}

namespace {

void emit(std::ostream* out, const nlohmann::json& rec) {
    if (out) *out << rec.dump() << '\n' << std::flush;
}

std::string checkpoint_name(const StageConfig& st) {
    return "stage" + std::to_string(st.stage_index) + "_" + std::to_string(st.resolution) + ".ckpt";
}

// RMSE of a freshly grown model measured at the previous stage's resolution.
double transfer_rmse(const AaeModel& next, const Dataset& hi, int lo_res, std::size_t limit) {
    std::vector<Image> originals, recon;
    const std::size_t n = std::min(limit, hi.samples.size());
    std::vector<Image> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(hi.samples[i].image);
    const auto out = images_from_tensor(next.decoder().infer(next.encode_tensor(to_tensor(batch))));
    for (std::size_t i = 0; i < n; ++i) {
        originals.push_back(resize(batch[i], lo_res, lo_res));
        recon.push_back(resize(out[i], lo_res, lo_res));
    }
    return rmse(originals, recon).overall;
}

}  // namespace

ProgressiveRun train_progressive(const Dataset& dataset, const StagePlan& plan, const ProgressiveHyper& hyper,
                                 const ProgressiveOptions& options) {
    if (dataset.samples.empty()) throw std::invalid_argument("train_progressive: empty dataset");
    if (plan.stages.empty()) throw std::invalid_argument("train_progressive: empty plan");
    if (!options.resize_on_ingest)
        for (const auto& s : dataset.samples)
            if (s.image.height != plan.target_res || s.image.width != plan.target_res)
                throw std::invalid_argument("images must match the target resolution when resize_on_ingest is off");
    if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

    std::mt19937_64 rng(hyper.seed ^ 0x51ed270b27a5f00dULL);
    const PriorSpec prior = PriorSpec::standard_normal(hyper.latent_dim);
    std::optional<AaeModel> current;
    std::optional<CheckpointContainer> last_good;
    std::vector<StageMetrics> metrics;
    long global_step = 0;

    for (const auto& st : plan.stages) {
        const Dataset data = resized(dataset, st.resolution);
        AaeModel model = build_stage(plan, st, current ? &*current : nullptr, hyper);
        StageMetrics sm;
        sm.stage = st.stage_index;
        sm.resolution = st.resolution;
        if (current) {
            sm.transfer_rmse = transfer_rmse(model, data, current->resolution(), 256);
            emit(options.metrics, {{"event", "transfer"}, {"stage", st.stage_index}, {"rmse", *sm.transfer_rmse}});
        }

        AaeTrainer trainer(model, hyper.optim);
        std::vector<std::size_t> order(data.samples.size());
        std::iota(order.begin(), order.end(), 0);
        const int batch = std::min<int>(st.batch_size, static_cast<int>(data.samples.size()));
        try {
            for (int epoch = 1; epoch <= st.epochs; ++epoch) {
                std::shuffle(order.begin(), order.end(), rng);
                double rsum = 0, dsum = 0, gsum = 0;
                int steps = 0;
                for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
                    std::vector<Image> imgs;
                    imgs.reserve(batch);
                    for (int b = 0; b < batch; ++b) imgs.push_back(data.samples[order[start + b]].image);
                    const Tensor x = to_tensor(imgs);
                    const double r = trainer.reconstruction_step(x, hyper.optim.denoise_sigma, rng);
                    const auto reg = trainer.regularization_step(x, prior, hyper.optim.disc_noise_sigma, rng);
                    rsum += r;
                    dsum += reg.d_loss;
                    gsum += reg.g_loss;
                    ++steps;
                    ++global_step;
                    emit(options.metrics, {{"step", global_step},
                                           {"stage", st.stage_index},
                                           {"epoch", epoch},
                                           {"recon_loss", r},
                                           {"d_loss", reg.d_loss},
                                           {"g_loss", reg.g_loss}});
                }
                steps = std::max(steps, 1);
                sm.recon_loss.push_back(rsum / steps);
                sm.d_loss.push_back(dsum / steps);
                sm.g_loss.push_back(gsum / steps);
                last_good = model.to_checkpoint();
            }
        } catch (const DivergenceError& e) {
            if (options.checkpoint_dir && last_good) last_good->save(*options.checkpoint_dir / "last_good.ckpt");
            emit(options.metrics, {{"event", "halt"}, {"stage", st.stage_index}, {"reason", e.what()}});
            metrics.push_back(std::move(sm));
            ProgressiveRun run{last_good ? AaeModel::from_checkpoint(*last_good) : std::move(model), std::move(metrics),
                               true, e.what()};
            return run;
        }

        std::vector<Image> images = data.images();
        const auto labels = data.labels();
        sm.final_rmse = rmse(model, images, labels).overall;
        std::mt19937_64 drng(hyper.seed + static_cast<std::uint64_t>(st.stage_index));
        sm.diversity = diversity_metric(model, std::max(2, options.diversity_samples), drng);
        emit(options.metrics, {{"event", "stage_done"},
                               {"stage", st.stage_index},
                               {"resolution", st.resolution},
                               {"rmse", sm.final_rmse},
                               {"diversity", sm.diversity}});
        if (options.checkpoint_dir) model.to_checkpoint().save(*options.checkpoint_dir / checkpoint_name(st));
        metrics.push_back(std::move(sm));
        current.emplace(std::move(model));
    }
    return {std::move(*current), std::move(metrics), false, ""};
}

}  // namespace latentlens
