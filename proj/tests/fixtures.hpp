#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "latentlens/aae.hpp"
#include "latentlens/classifier.hpp"

namespace latentlens::testing {

// Labels an image by which band its mean intensity falls in.
class BandBox final : public BlackBox {
public:
    BandBox(int res, std::vector<double> cuts, int channels = 3) : res_(res), channels_(channels), cuts_(std::move(cuts)) {}

    int num_classes() const override { return static_cast<int>(cuts_.size()) + 1; }
    int input_height() const override { return res_; }
    int input_width() const override { return res_; }
    int input_channels() const override { return channels_; }

    static double mean(const Image& img) {
        double s = 0.0;
        for (double v : img.pixels) s += v;
        return s / static_cast<double>(img.size());
    }

    std::vector<Prediction> predict_batch(std::span<const Image> images) const override {
        std::vector<Prediction> out;
        for (const auto& img : images) {
            if (img.height != res_ || img.width != res_ || img.channels != channels_)
                throw ShapeError("BandBox: wrong input shape");
            const double m = mean(img);
            int label = 0;
            while (label < static_cast<int>(cuts_.size()) && m > cuts_[label]) ++label;
            Prediction p;
            p.scores.scores.assign(num_classes(), 0.0);
            p.scores.scores[label] = 1.0;
            p.label = label;
            out.push_back(std::move(p));
        }
        return out;
    }

private:
    int res_, channels_;
    std::vector<double> cuts_;
};

inline AaeConfig tiny_aae_config(int k = 4, int res = 8, std::uint64_t seed = 5) {
    AaeConfig cfg;
    cfg.latent_dim = k;
    cfg.channels = 3;
    cfg.base_res = res;
    cfg.stage = 1;
    cfg.filters = {4, 8, 1};
    cfg.disc_width = 8;
    cfg.mbd = {4, 3};
    cfg.seed = seed;
    return cfg;
}

// Median decoded mean intensity of prior samples: a cut that splits the
// decoder's outputs roughly in half.
inline double median_decoded_mean(const AaeModel& m, int samples = 64, std::uint64_t seed = 9) {
    std::mt19937_64 rng(seed);
    const auto codes = sample_prior(PriorSpec::standard_normal(m.latent_dim()), samples, rng);
    std::vector<double> means;
    for (const auto& img : m.decode(codes)) means.push_back(BandBox::mean(img));
    std::nth_element(means.begin(), means.begin() + samples / 2, means.end());
    return means[samples / 2];
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("latentlens_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Image random_image(int h, int w, int c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(h, w, c);
    for (double& v : img.pixels) v = u(rng);
    return img;
}

}  // namespace latentlens::testing
