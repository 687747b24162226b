#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "latentlens/aae.hpp"
#include "latentlens/dataset.hpp"

using namespace latentlens;
using namespace latentlens::testing;

namespace {

Tensor gaussian_tensor(std::vector<int> shape, double sigma, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> nd(0.0, sigma);
    for (double& v : t.storage()) v = nd(rng);
    return t;
}

}  // namespace

TEST_CASE("train-mode codes are standardized per feature") {
    AaeModel m(tiny_aae_config(4, 8, 9));
    const Dataset ds = make_blob_dataset(24, 8, 3);
    const Tensor z = m.encoder().forward(to_tensor(ds.images()));
    REQUIRE(z.rank() == 2);
    const int n = z.dim(0), k = z.dim(1);
    for (int j = 0; j < k; ++j) {
        double mean = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) mean += z.storage()[i * k + j];
        mean /= n;
        for (int i = 0; i < n; ++i) sq += std::pow(z.storage()[i * k + j] - mean, 2);
        CHECK(mean == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(std::sqrt(sq / n) == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("autoencoder shapes and output range") {
    AaeModel m(tiny_aae_config());
    const Dataset ds = make_blob_dataset(5, 8, 1);
    const auto codes = m.encode(ds.images());
    REQUIRE(codes.size() == 5);
    CHECK(codes[0].size() == 4);
    const auto out = m.decode(codes);
    REQUIRE(out.size() == 5);
    CHECK(out[0].height == 8);
    CHECK(out[0].channels == 3);
    for (const auto& img : out)
        for (double v : img.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    const auto d = m.discriminate(codes);
    REQUIRE(d.size() == 5);
    for (double p : d) CHECK((p > 0.0 && p < 1.0));
    CHECK_THROWS(m.discriminate(std::vector<LatentCode>{}));
    CHECK_THROWS_AS(m.decode(LatentCode{{1.0, 2.0}}), ShapeError);
    CHECK_THROWS_AS(m.encode(Image(9, 8, 3)), ShapeError);
}

TEST_CASE("a batch of one is scored") {
    AaeModel m(tiny_aae_config());
    const LatentCode z{{0.1, -0.2, 0.3, 0.0}};
    const auto p = m.discriminate(std::span<const LatentCode>(&z, 1));
    REQUIRE(p.size() == 1);
    CHECK(std::isfinite(p[0]));
}

TEST_CASE("discriminator loss is ln 2 for a blind discriminator") {
    AaeModel m(tiny_aae_config());
    // Zero the output layer so every logit is 0.
    auto params = nn::parameters(m.discriminator());
    for (auto* p : params)
        if (p->name.find("out.") != std::string::npos) p->value.fill(0.0);
    std::mt19937_64 rng(2);
    const Tensor a = gaussian_tensor({6, 4}, 1.0, rng), b = gaussian_tensor({6, 4}, 1.0, rng);
    CHECK(discriminator_loss(m, a, b) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("adversarial autoencoder losses pass finite-difference checks") {
    AaeModel m(tiny_aae_config(4, 8, 21));
    const Dataset ds = make_blob_dataset(3, 8, 6);
    const Tensor clean = to_tensor(ds.images());
    std::mt19937_64 rng(4);
    const Tensor noisy = corrupt(clean, 0.1, rng);
    const Tensor prior = gaussian_tensor({3, 4}, 1.0, rng);
    const Tensor enc = gaussian_tensor({3, 4}, 1.0, rng);
    const Tensor code_noise = gaussian_tensor({3, 4}, 0.1, rng);

    SUBCASE("reconstruction") {
        auto loss = [&] { return reconstruction_loss(m, clean, noisy); };
        const auto r = gradient_check(loss, m.autoencoder_parameters());
        CHECK(r.max_rel_error <= 1e-4);
    }
    SUBCASE("discriminator") {
        auto loss = [&] { return discriminator_loss(m, prior, enc); };
        const auto r = gradient_check(loss, nn::parameters(m.discriminator()));
        CHECK(r.max_rel_error <= 1e-4);
    }
    SUBCASE("generator") {
        auto loss = [&] { return generator_loss(m, clean, code_noise); };
        std::vector<nn::Parameter*> enc_params;
        for (auto* p : nn::parameters(m.encoder())) enc_params.push_back(p);
        // The encoder's ReLU and max-pool kinks sit close to the operating
        // point under batch norm over three samples; a finer step avoids them.
        const auto r = gradient_check(loss, enc_params, 40, 1e-6);
        INFO(r.worst);
        CHECK(r.max_rel_error <= 1e-4);
    }
}

TEST_CASE("prior sampling follows the law of large numbers") {
    std::mt19937_64 rng(8);
    const PriorSpec prior = PriorSpec::standard_normal(8);
    const auto codes = sample_prior(prior, 4000, rng);
    double sum = 0.0, sq = 0.0;
    for (const auto& c : codes)
        for (double v : c.values) {
            sum += v;
            sq += v * v;
        }
    const double n = 4000.0 * 8.0;
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    const LatentCode zero{std::vector<double>(8, 0.0)};
    CHECK(prior.log_density(zero) == doctest::Approx(-4.0 * std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("zero-noise corruption is the identity") {
    std::mt19937_64 rng(1);
    const Tensor x = to_tensor(make_blob_dataset(2, 8, 1).images());
    CHECK(corrupt(x, 0.0, rng).storage() == x.storage());
    const Tensor y = corrupt(x, 0.5, rng);
    for (double v : y.storage()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS(corrupt(x, -1.0, rng));
}

TEST_CASE("reconstruction training lowers the loss") {
    AaeModel m(tiny_aae_config(4, 8, 3));
    AaeTrainer trainer(m, AaeHyper{});
    const Tensor x = to_tensor(make_blob_dataset(16, 8, 2).images());
    std::mt19937_64 rng(5);
    const double first = trainer.reconstruction_step(x, 0.0, rng);
    double last = first;
    for (int i = 0; i < 200; ++i) last = trainer.reconstruction_step(x, 0.0, rng);
    CHECK(last < 0.5 * first);
    const auto reg = trainer.regularization_step(x, PriorSpec::standard_normal(4), 0.1, rng);
    CHECK(std::isfinite(reg.d_loss));
    CHECK(std::isfinite(reg.g_loss));
}

TEST_CASE("rmse pools pixels and splits by class") {
    Image a(2, 2, 1, 0.0), b(2, 2, 1, 0.5), c(2, 2, 1, 1.0);
    std::vector<Image> orig{a, a}, rec{b, c};
    std::vector<int> labels{0, 1};
    const auto r = rmse(orig, rec, labels);
    CHECK(r.overall == doctest::Approx(std::sqrt((0.25 + 1.0) / 2.0)));
    CHECK(r.per_class.at(0) == doctest::Approx(0.5));
    CHECK(r.per_class.at(1) == doctest::Approx(1.0));
}

TEST_CASE("filter schedule doubles toward coarse levels and caps") {
    FilterSchedule fs{16, 128, 6};
    CHECK(fs.at(6) == 16);
    CHECK(fs.at(5) == 32);
    CHECK(fs.at(4) == 64);
    CHECK(fs.at(3) == 128);
    CHECK(fs.at(1) == 128);
}
