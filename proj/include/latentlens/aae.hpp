#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentlens/checkpoint.hpp"
#include "latentlens/image.hpp"
#include "latentlens/nn.hpp"

namespace latentlens {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LatentCode {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool operator==(const LatentCode&) const = default;
};

Tensor to_tensor(std::span<const LatentCode> codes);
std::vector<LatentCode> codes_from_tensor(const Tensor& t);

// Isotropic normal prior N(mean, scale^2 I) over R^k.
struct PriorSpec {
    int dim = 256;
    double mean = 0.0;
    double scale = 1.0;

    static PriorSpec standard_normal(int k) { return {k, 0.0, 1.0}; }
    double log_density(const LatentCode& z) const;
};

std::vector<LatentCode> sample_prior(const PriorSpec& prior, int count, std::mt19937_64& rng);

// Channel widths per resolution level. Level 1 is the coarsest block; the
// finest level (`levels`) gets `base` filters and widths double toward the
// coarse end, capped at `cap`. Level 0 is the decoder's dense projection and
// level `levels + 1` the encoder's input adapter.
struct FilterSchedule {
    int base = 16;
    int cap = 128;
    int levels = 1;

    int at(int level) const;
};

struct AaeConfig {
    int latent_dim = 256;
    int channels = 3;
    int base_res = 7;
    int stage = 1;
    FilterSchedule filters;
    int conv_stride = 1;
    double bn_momentum = 0.95;
    int disc_width = 500;
    nn::MbdConfig mbd;
    bool minibatch_discrimination = true;
    double leaky_slope = 0.2;
    std::uint64_t seed = 1;

    int resolution() const { return base_res << (stage - 1); }
    int level_resolution(int level) const { return base_res << (level - 1); }
};

// Adversarial autoencoder at a fixed resolution.
//
// encoder: input adapter, blocks (finest .. coarsest), dense to k
// decoder: dense from k, blocks (coarsest .. finest), 3x3 conv + sigmoid
// discriminator: two leaky-ReLU dense layers of disc_width, minibatch
//   discrimination features, single-logit output
//
// Parameter names carry the block level ("encoder.level2.conv1.weight"), so
// blocks keep their names when the network grows.
class AaeModel {
public:
    explicit AaeModel(const AaeConfig& cfg);

    const AaeConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    int resolution() const { return cfg_.resolution(); }
    int stage() const { return cfg_.stage; }

    LatentCode encode(const Image& img) const;
    std::vector<LatentCode> encode(std::span<const Image> images) const;
    Tensor encode_tensor(const Tensor& images) const;

    Image decode(const LatentCode& z) const;
    std::vector<Image> decode(std::span<const LatentCode> codes) const;
    Tensor decode_tensor(const Tensor& codes) const;

    // Probability that each code was drawn from the prior. Batch-wise because
    // of the minibatch features; throws on an empty batch.
    std::vector<double> discriminate(std::span<const LatentCode> batch) const;
    Tensor discriminator_logits(const Tensor& codes) const;

    nn::Sequential& encoder() { return encoder_; }
    nn::Sequential& decoder() { return decoder_; }
    nn::Sequential& discriminator() { return discriminator_; }
    const nn::Sequential& encoder() const { return encoder_; }
    const nn::Sequential& decoder() const { return decoder_; }
    const nn::Sequential& discriminator() const { return discriminator_; }

    std::vector<nn::Parameter*> autoencoder_parameters();
    std::vector<nn::Parameter*> all_parameters();
    std::size_t parameter_count();

    CheckpointContainer to_checkpoint();
    static AaeModel from_checkpoint(const CheckpointContainer& ckpt);

private:
    void check_image(const Tensor& images) const;
    AaeConfig cfg_;
    nn::Sequential encoder_, decoder_, discriminator_;
};

// Losses with explicit randomness so they are deterministic functions of the
// parameters. Each zeroes nothing: gradients accumulate into the parameters
// the loss touches.

// MSE between decode(encode(noisy)) and clean.
double reconstruction_loss(AaeModel& m, const Tensor& clean, const Tensor& noisy);
// Binary cross-entropy of the discriminator: prior codes labelled 1, encoded
// codes labelled 0, averaged over all 2N samples. Codes already carry any
// input noise. Gradients reach the discriminator only.
double discriminator_loss(AaeModel& m, const Tensor& prior_codes, const Tensor& encoded_codes);
// Non-saturating generator loss -log D(encode(x) + noise). Gradients reach the
// encoder (and, as a side effect, the discriminator, whose grads callers discard).
// The first `singles` codes also contribute a batch-of-one term, weighted
// 1/singles, to the gradient; the returned value is the batch loss.
double generator_loss(AaeModel& m, const Tensor& images, const Tensor& code_noise, int singles = 0);

struct AaeHyper {
    double learning_rate = 2e-3;
    double disc_learning_rate = 1e-3;
    double gen_learning_rate = 2e-4;
    double denoise_sigma = 0.1;
    double disc_noise_sigma = 0.1;
    // Prior/encoded pairs per step also shown to the discriminator one at a time.
    int singleton_pairs = 8;
};

struct RegularizationLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
};

// Owns the optimizer state for one model; the model must outlive the trainer
// and must not be moved while it exists.
class AaeTrainer {
public:
    AaeTrainer(AaeModel& model, const AaeHyper& hyper);

    // Gaussian corruption (clipped to [0,1]) of the inputs, clean targets.
    double reconstruction_step(const Tensor& batch, double sigma, std::mt19937_64& rng);
    RegularizationLosses regularization_step(const Tensor& batch, const PriorSpec& prior, double noise_sigma,
                                             std::mt19937_64& rng);

private:
    AaeModel& model_;
    AaeHyper hyper_;
    nn::Adam ae_opt_, disc_opt_, gen_opt_;
};

Tensor corrupt(const Tensor& clean, double sigma, std::mt19937_64& rng);

struct RmseReport {
    double overall = 0.0;
    std::map<int, double> per_class;
};

// Pooled root-mean-squared pixel error; per-class groups when labels are given.
RmseReport rmse(std::span<const Image> originals, std::span<const Image> reconstructions,
                std::span<const int> labels = {});
RmseReport rmse(const AaeModel& m, std::span<const Image> images, std::span<const int> labels = {});

}  // namespace latentlens
