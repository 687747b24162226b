#include "latentlens/aae.hpp"

#include "latentlens/conv_block.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace latentlens {

Tensor to_tensor(std::span<const LatentCode> codes) {
    if (codes.empty()) throw ShapeError("no latent codes");
    const int k = static_cast<int>(codes.front().size());
    Tensor t({static_cast<int>(codes.size()), k});
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (static_cast<int>(codes[i].size()) != k) throw ShapeError("latent codes differ in length");
        std::copy(codes[i].values.begin(), codes[i].values.end(), t.data() + i * k);
    }
    return t;
}

std::vector<LatentCode> codes_from_tensor(const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("latent batch must be N x k, got " + t.shape_string());
    const int n = t.dim(0), k = t.dim(1);
    std::vector<LatentCode> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i].values.assign(t.data() + static_cast<std::size_t>(i) * k, t.data() + static_cast<std::size_t>(i + 1) * k);
    return out;
}

double PriorSpec::log_density(const LatentCode& z) const {
    if (static_cast<int>(z.size()) != dim) throw ShapeError("latent length does not match prior");
    double q = 0.0;
    for (double v : z.values) q += (v - mean) * (v - mean);
    return -0.5 * q / (scale * scale) - dim * (std::log(scale) + 0.5 * std::log(2 * std::numbers::pi));
}

std::vector<LatentCode> sample_prior(const PriorSpec& prior, int count, std::mt19937_64& rng) {
    if (count < 1) throw std::invalid_argument("sample_prior: count must be >= 1");
    std::normal_distribution<double> nd(prior.mean, prior.scale);
    std::vector<LatentCode> out(static_cast<std::size_t>(count));
    for (auto& z : out) {
        z.values.resize(static_cast<std::size_t>(prior.dim));
        for (double& v : z.values) v = nd(rng);
    }
    return out;
}

int FilterSchedule::at(int level) const {
    const int shift = levels - level;
    long f = shift >= 0 ? static_cast<long>(base) << std::min(shift, 20) : base >> std::min(-shift, 20);
    return static_cast<int>(std::clamp<long>(f, 1, cap));
}

AaeModel::AaeModel(const AaeConfig& cfg) : cfg_(cfg) {
    if (cfg.stage < 1) throw std::invalid_argument("stage index is 1-based");
    if (cfg.latent_dim < 1) throw std::invalid_argument("latent_dim must be positive");
    if (cfg.channels != 1 && cfg.channels != 3) throw std::invalid_argument("channels must be 1 or 3");
    nn::Rng rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(cfg.stage));
    const int s = cfg.stage;
    const auto& fs = cfg.filters;

    // Encoder, finest level first.
    encoder_.emplace<nn::Conv2d>("encoder.from_rgb", cfg.channels, fs.at(s + 1), 1, 1, 0, rng);
    int res = cfg.resolution();
    for (int level = s; level >= 1; --level) {
        const auto spec = conv_block(BlockDirection::Encode, fs.at(level + 1), fs.at(level), cfg.conv_stride,
                                     cfg.bn_momentum);
        append_block(encoder_, spec, "encoder.level" + std::to_string(level) + ".", 0, rng);
        for (int r = 0; r < spec.repetitions; ++r) res = (res + 2 * (spec.kernel / 2) - spec.kernel) / spec.stride + 1;
        res = (res + 1) / 2;
    }
    if (res < 1) throw std::invalid_argument("encoder collapses the image below 1x1; check stride");
    const int flat = fs.at(1) * res * res;
    encoder_.emplace<nn::Reshape>(std::vector<int>{flat});
    encoder_.emplace<nn::Dense>("encoder.to_latent", flat, cfg.latent_dim, rng);
    encoder_.emplace<nn::Reshape>(std::vector<int>{cfg.latent_dim, 1, 1});
    encoder_.emplace<nn::BatchNorm2d>("encoder.latent_norm", cfg.latent_dim, cfg.bn_momentum);
    encoder_.emplace<nn::Reshape>(std::vector<int>{cfg.latent_dim});

    // Decoder, coarsest level first. Bottleneck matches the encoder's at stage 1.
    const int bottleneck = (cfg.base_res + 1) / 2;
    decoder_.emplace<nn::Dense>("decoder.from_latent", cfg.latent_dim, fs.at(0) * bottleneck * bottleneck, rng);
    decoder_.emplace<nn::ReLU>();
    decoder_.emplace<nn::Reshape>(std::vector<int>{fs.at(0), bottleneck, bottleneck});
    for (int level = 1; level <= s; ++level) {
        const auto spec = conv_block(BlockDirection::Decode, fs.at(level - 1), fs.at(level), cfg.conv_stride,
                                     cfg.bn_momentum);
        append_block(decoder_, spec, "decoder.level" + std::to_string(level) + ".", cfg.level_resolution(level), rng);
    }
    decoder_.emplace<nn::Conv2d>("decoder.to_rgb", fs.at(s), cfg.channels, 3, 1, 1, rng);
    decoder_.emplace<nn::Sigmoid>();

    // Discriminator over latent codes.
    discriminator_.emplace<nn::Dense>("discriminator.fc1", cfg.latent_dim, cfg.disc_width, rng);
    discriminator_.emplace<nn::LeakyReLU>(cfg.leaky_slope);
    discriminator_.emplace<nn::Dense>("discriminator.fc2", cfg.disc_width, cfg.disc_width, rng);
    discriminator_.emplace<nn::LeakyReLU>(cfg.leaky_slope);
    int width = cfg.disc_width;
    if (cfg.minibatch_discrimination) {
        discriminator_.emplace<nn::MinibatchDiscrimination>("discriminator.minibatch", cfg.disc_width, cfg.mbd, rng);
        width += cfg.mbd.kernels;
    }
    discriminator_.emplace<nn::Dense>("discriminator.out", width, 1, rng);
}

void AaeModel::check_image(const Tensor& images) const {
    const int r = resolution();
    if (images.rank() != 4 || images.dim(1) != cfg_.channels || images.dim(2) != r || images.dim(3) != r)
        throw ShapeError("AAE at stage " + std::to_string(cfg_.stage) + " expects N x " + std::to_string(cfg_.channels) +
                         " x " + std::to_string(r) + " x " + std::to_string(r) + " images, got " + images.shape_string());
}

Tensor AaeModel::encode_tensor(const Tensor& images) const {
    check_image(images);
    return encoder_.infer(images);
}

LatentCode AaeModel::encode(const Image& img) const {
    return codes_from_tensor(encode_tensor(to_tensor(img))).front();
}

std::vector<LatentCode> AaeModel::encode(std::span<const Image> images) const {
    if (images.empty()) return {};
    return codes_from_tensor(encode_tensor(to_tensor(images)));
}

Tensor AaeModel::decode_tensor(const Tensor& codes) const {
    if (codes.rank() != 2 || codes.dim(1) != cfg_.latent_dim)
        throw ShapeError("decoder expects N x " + std::to_string(cfg_.latent_dim) + " codes, got " + codes.shape_string());
    return decoder_.infer(codes);
}

Image AaeModel::decode(const LatentCode& z) const {
    if (static_cast<int>(z.size()) != cfg_.latent_dim)
        throw ShapeError("latent code has length " + std::to_string(z.size()) + ", model expects " +
                         std::to_string(cfg_.latent_dim));
    return image_from_tensor(decode_tensor(to_tensor(std::span<const LatentCode>(&z, 1))), 0);
}

std::vector<Image> AaeModel::decode(std::span<const LatentCode> codes) const {
    if (codes.empty()) return {};
    return images_from_tensor(decode_tensor(to_tensor(codes)));
}

Tensor AaeModel::discriminator_logits(const Tensor& codes) const {
    if (codes.rank() != 2 || codes.dim(0) < 1 || codes.dim(1) != cfg_.latent_dim)
        throw ShapeError("discriminator expects a nonempty N x " + std::to_string(cfg_.latent_dim) + " batch, got " +
                         codes.shape_string());
    return discriminator_.infer(codes);
}

std::vector<double> AaeModel::discriminate(std::span<const LatentCode> batch) const {
    if (batch.empty()) throw std::invalid_argument("discriminate: empty batch");
    const Tensor logits = discriminator_logits(to_tensor(batch));
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = nn::sigmoid(logits[i]);
    return out;
}

std::vector<nn::Parameter*> AaeModel::autoencoder_parameters() {
    auto p = nn::parameters(encoder_);
    auto d = nn::parameters(decoder_);
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

std::vector<nn::Parameter*> AaeModel::all_parameters() {
    auto p = autoencoder_parameters();
    auto d = nn::parameters(discriminator_);
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

std::size_t AaeModel::parameter_count() {
    return nn::parameter_count(encoder_) + nn::parameter_count(decoder_) + nn::parameter_count(discriminator_);
}

CheckpointContainer AaeModel::to_checkpoint() {
    CheckpointContainer c("aae");
    auto& m = c.metadata();
    m["latent_dim"] = cfg_.latent_dim;
    m["channels"] = cfg_.channels;
    m["base_res"] = cfg_.base_res;
    m["stage"] = cfg_.stage;
    m["resolution"] = cfg_.resolution();
    m["filters"] = {{"base", cfg_.filters.base}, {"cap", cfg_.filters.cap}, {"levels", cfg_.filters.levels}};
    m["conv_stride"] = cfg_.conv_stride;
    m["bn_momentum"] = cfg_.bn_momentum;
    m["disc_width"] = cfg_.disc_width;
    m["mbd"] = {{"B", cfg_.mbd.kernels}, {"C", cfg_.mbd.kernel_dim}, {"enabled", cfg_.minibatch_discrimination}};
    m["leaky_slope"] = cfg_.leaky_slope;
    m["seed"] = cfg_.seed;
    for (auto* p : all_parameters()) c.put(p->name, p->value);
    return c;
}

AaeModel AaeModel::from_checkpoint(const CheckpointContainer& ckpt) {
    if (ckpt.kind() != "aae") throw std::runtime_error("checkpoint is not an AAE");
    const auto& m = ckpt.metadata();
    AaeConfig cfg;
    cfg.latent_dim = m.at("latent_dim");
    cfg.channels = m.at("channels");
    cfg.base_res = m.at("base_res");
    cfg.stage = m.at("stage");
    cfg.filters = {m.at("filters").at("base"), m.at("filters").at("cap"), m.at("filters").at("levels")};
    cfg.conv_stride = m.at("conv_stride");
    cfg.bn_momentum = m.at("bn_momentum");
    cfg.disc_width = m.at("disc_width");
    cfg.mbd = {m.at("mbd").at("B"), m.at("mbd").at("C")};
    cfg.minibatch_discrimination = m.at("mbd").at("enabled");
    cfg.leaky_slope = m.at("leaky_slope");
    cfg.seed = m.at("seed");
    AaeModel model(cfg);
    for (auto* p : model.all_parameters()) {
        const Tensor& t = ckpt.get(p->name);
        if (t.shape() != p->value.shape()) throw ShapeError("checkpoint shape mismatch for " + p->name);
        p->value = t;
    }
    return model;
}

// ---------------------------------------------------------------- losses

double reconstruction_loss(AaeModel& m, const Tensor& clean, const Tensor& noisy) {
    const Tensor z = m.encoder().forward(noisy);
    const Tensor recon = m.decoder().forward(z);
    const auto loss = nn::mse_loss(recon, clean);
    if (!std::isfinite(loss.value)) throw DivergenceError("reconstruction loss is not finite");
    m.encoder().backward(m.decoder().backward(loss.grad));
    return loss.value;
}

namespace {

double weighted_discriminator_loss(AaeModel& m, const Tensor& prior_codes, const Tensor& encoded_codes,
                                   double weight) {
    const Tensor real = m.discriminator().forward(prior_codes);
    const auto lr = nn::bce_with_logits(real, Tensor(real.shape(), 1.0));
    Tensor g = lr.grad;
    g *= 0.5 * weight;
    m.discriminator().backward(g);
    const Tensor fake = m.discriminator().forward(encoded_codes);
    const auto lf = nn::bce_with_logits(fake, Tensor(fake.shape(), 0.0));
    g = lf.grad;
    g *= 0.5 * weight;
    m.discriminator().backward(g);
    const double v = 0.5 * (lr.value + lf.value);
    if (!std::isfinite(v)) throw DivergenceError("discriminator loss is not finite");
    return v;
}

}  // namespace

double discriminator_loss(AaeModel& m, const Tensor& prior_codes, const Tensor& encoded_codes) {
    return weighted_discriminator_loss(m, prior_codes, encoded_codes, 1.0);
}

double generator_loss(AaeModel& m, const Tensor& images, const Tensor& code_noise, int singles) {
    Tensor z = m.encoder().forward(images);
    z += code_noise;
    const Tensor logits = m.discriminator().forward(z);
    const auto loss = nn::bce_with_logits(logits, Tensor(logits.shape(), 1.0));
    if (!std::isfinite(loss.value)) throw DivergenceError("generator loss is not finite");
    Tensor grad = m.discriminator().backward(loss.grad);
    // Leading rows are also scored alone, as validity checks see them.
    singles = std::min(singles, z.dim(0));
    const int k = z.dim(1);
    for (int i = 0; i < singles; ++i) {
        const Tensor one = m.discriminator().forward(z.slice_rows(i, i + 1));
        auto l = nn::bce_with_logits(one, Tensor(one.shape(), 1.0));
        l.grad *= 1.0 / singles;
        const Tensor g = m.discriminator().backward(l.grad);
        for (int j = 0; j < k; ++j) grad.storage()[static_cast<std::size_t>(i) * k + j] += g.storage()[j];
    }
    m.encoder().backward(grad);
    return loss.value;
}

Tensor corrupt(const Tensor& clean, double sigma, std::mt19937_64& rng) {
    if (sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
    Tensor out = clean;
    if (sigma == 0) return out;
    std::normal_distribution<double> nd(0.0, sigma);
    for (double& v : out.storage()) v = std::clamp(v + nd(rng), 0.0, 1.0);
    return out;
}

namespace {

Tensor gaussian(std::vector<int> shape, double sigma, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    if (sigma <= 0) return t;
    std::normal_distribution<double> nd(0.0, sigma);
    for (double& v : t.storage()) v = nd(rng);
    return t;
}

std::vector<nn::Parameter*> encoder_params(AaeModel& m) { return nn::parameters(m.encoder()); }

}  // namespace

AaeTrainer::AaeTrainer(AaeModel& model, const AaeHyper& hyper)
    : model_(model),
      hyper_(hyper),
      ae_opt_(model.autoencoder_parameters(), hyper.learning_rate),
      disc_opt_(nn::parameters(model.discriminator()), hyper.disc_learning_rate, 0.5),
      gen_opt_(encoder_params(model), hyper.gen_learning_rate, 0.5) {}

double AaeTrainer::reconstruction_step(const Tensor& batch, double sigma, std::mt19937_64& rng) {
    const Tensor noisy = corrupt(batch, sigma, rng);
    ae_opt_.zero_grad();
    const double loss = reconstruction_loss(model_, batch, noisy);
    ae_opt_.step();
    return loss;
}

RegularizationLosses AaeTrainer::regularization_step(const Tensor& batch, const PriorSpec& prior, double noise_sigma,
                                                     std::mt19937_64& rng) {
    if (batch.rank() != 4 || batch.dim(0) < 1) throw std::invalid_argument("regularization_step: empty batch");
    const int n = batch.dim(0), k = model_.latent_dim();
    RegularizationLosses out;

    Tensor prior_codes = to_tensor(sample_prior(prior, n, rng));
    prior_codes += gaussian({n, k}, noise_sigma, rng);
    // Train-mode encoding, matching what the generator step optimizes.
    Tensor encoded = model_.encoder().forward(batch);
    encoded += gaussian({n, k}, noise_sigma, rng);
    disc_opt_.zero_grad();
    out.d_loss = discriminator_loss(model_, prior_codes, encoded);
    // Single codes are scored as batches of one (zero closeness features), so
    // the discriminator also sees a few singleton batches.
    const int singles = std::min(n, hyper_.singleton_pairs);
    for (int i = 0; i < singles; ++i)
        weighted_discriminator_loss(model_, prior_codes.slice_rows(i, i + 1), encoded.slice_rows(i, i + 1),
                                    1.0 / singles);
    disc_opt_.step();

    gen_opt_.zero_grad();
    out.g_loss = generator_loss(model_, batch, gaussian({n, k}, noise_sigma, rng), singles);
    gen_opt_.step();
    return out;
}

// ---------------------------------------------------------------- rmse

RmseReport rmse(std::span<const Image> originals, std::span<const Image> reconstructions, std::span<const int> labels) {
    if (originals.empty()) throw std::invalid_argument("rmse: empty dataset");
    if (originals.size() != reconstructions.size()) throw std::invalid_argument("rmse: size mismatch");
    if (!labels.empty() && labels.size() != originals.size()) throw std::invalid_argument("rmse: label count mismatch");
    double total = 0.0;
    std::size_t count = 0;
    std::map<int, std::pair<double, std::size_t>> groups;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (!originals[i].same_shape(reconstructions[i])) throw ShapeError("rmse: image shape mismatch");
        double se = 0.0;
        for (std::size_t p = 0; p < originals[i].size(); ++p) {
            const double d = originals[i].pixels[p] - reconstructions[i].pixels[p];
            se += d * d;
        }
        total += se;
        count += originals[i].size();
        if (!labels.empty()) {
            auto& g = groups[labels[i]];
            g.first += se;
            g.second += originals[i].size();
        }
    }
    RmseReport r;
    r.overall = std::sqrt(total / static_cast<double>(count));
    for (const auto& [cls, g] : groups) r.per_class[cls] = std::sqrt(g.first / static_cast<double>(g.second));
    return r;
}

RmseReport rmse(const AaeModel& m, std::span<const Image> images, std::span<const int> labels) {
    std::vector<Image> recon;
    recon.reserve(images.size());
    constexpr std::size_t kChunk = 128;
    for (std::size_t start = 0; start < images.size(); start += kChunk) {
        const auto part = images.subspan(start, std::min(kChunk, images.size() - start));
        auto dec = images_from_tensor(m.decoder().infer(m.encode_tensor(to_tensor(part))));
        for (auto& im : dec) recon.push_back(std::move(im));
    }
    return rmse(images, recon, labels);
}

}  // namespace latentlens
