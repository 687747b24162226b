#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentlens/tensor.hpp"

namespace latentlens {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// H x W x C pixels in [0,1], interleaved (HWC).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0);
    Image(int h, int w, int c, std::vector<double> px);

    double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return pixels.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    // Throws ImageError when a structural invariant is broken.
    void validate() const;

    bool operator==(const Image&) const = default;
};

// Images <-> NCHW tensors.
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);
Image image_from_tensor(const Tensor& batch, int index);
std::vector<Image> images_from_tensor(const Tensor& batch);

// Separable resampling: area averaging along shrinking axes, linear interpolation
// along enlarging axes (pixel-centre aligned).
Image resize(const Image& img, int out_h, int out_w);
Image center_crop(const Image& img, int crop_h, int crop_w);
Image clamp01(Image img);

struct AugmentConfig {
    double max_rotation_deg = 30.0;
    double scale_min = 1.0;  // relative to the shorter edge matching target_res
    double scale_max = 1.25;
    bool center_crop = false;  // false: uniformly random crop offset
    int min_source_edge = 8;
};

// Label-preserving random rescale, rotation (edge-replicated) and crop.
Image preprocess_train(const Image& img, std::mt19937_64& rng, int target_res, const AugmentConfig& cfg = {});

// Aspect-preserving shorter-edge resize to resize_edge, then a centred crop x crop.
Image preprocess_eval(const Image& img, int resize_edge, int crop);

// PNG/JPEG codec; decoded images are RGB (or grey for single-channel files).
Image load_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& img);
void save_png(const Image& img, const std::filesystem::path& path);

}  // namespace latentlens
