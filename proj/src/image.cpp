#include "latentlens/image.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace latentlens {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(std::max(h, 0)) * std::max(w, 0) * std::max(c, 0), fill) {}

Image::Image(int h, int w, int c, std::vector<double> px)
    : height(h), width(w), channels(c), pixels(std::move(px)) {
    if (pixels.size() != static_cast<std::size_t>(h) * w * c)
        throw ImageError("pixel buffer does not match " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                         std::to_string(c));
}

void Image::validate() const {
    if (height <= 0 || width <= 0) throw ImageError("image must be nonempty");
    if (channels != 1 && channels != 3) throw ImageError("channels must be 1 or 3");
    if (pixels.size() != static_cast<std::size_t>(height) * width * channels)
        throw ImageError("pixel buffer size mismatch");
    for (double v : pixels)
        if (!(v >= 0.0 && v <= 1.0)) throw ImageError("pixel value outside [0,1]");
}

Tensor to_tensor(std::span<const Image> images) {
    if (images.empty()) throw ShapeError("to_tensor on empty image list");
    const Image& f = images.front();
    const int n = static_cast<int>(images.size());
    Tensor t({n, f.channels, f.height, f.width});
    for (int s = 0; s < n; ++s) {
        const Image& im = images[s];
        if (!im.same_shape(f)) throw ShapeError("to_tensor: images differ in shape");
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                for (int c = 0; c < im.channels; ++c) t.at4(s, c, y, x) = im.at(y, x, c);
    }
    return t;
}

Tensor to_tensor(const Image& image) { return to_tensor(std::span<const Image>(&image, 1)); }

Image image_from_tensor(const Tensor& t, int index) {
    if (t.rank() != 4) throw ShapeError("image_from_tensor expects NCHW, got " + t.shape_string());
    Image im(t.dim(2), t.dim(3), t.dim(1));
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (int c = 0; c < im.channels; ++c) im.at(y, x, c) = t.at4(index, c, y, x);
    return im;
}

std::vector<Image> images_from_tensor(const Tensor& t) {
    std::vector<Image> out;
    out.reserve(t.dim(0));
    for (int i = 0; i < t.dim(0); ++i) out.push_back(image_from_tensor(t, i));
    return out;
}

namespace {

struct Tap {
    int index;
    double weight;
};

// Resampling taps for one axis, one vector per output coordinate.
std::vector<std::vector<Tap>> axis_taps(int in, int out) {
    std::vector<std::vector<Tap>> taps(out);
    const double scale = static_cast<double>(in) / out;
    if (out < in) {
        for (int o = 0; o < out; ++o) {
            const double lo = o * scale, hi = (o + 1) * scale;
            for (int i = static_cast<int>(std::floor(lo)); i < std::min(in, static_cast<int>(std::ceil(hi))); ++i) {
                const double cover = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
                if (cover > 0) taps[o].push_back({i, cover / scale});
            }
        }
    } else {
        for (int o = 0; o < out; ++o) {
            const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, in - 1.0);
            const int i0 = static_cast<int>(std::floor(src));
            const int i1 = std::min(i0 + 1, in - 1);
            const double f = src - i0;
            if (f == 0.0 || i1 == i0)
                taps[o].push_back({i0, 1.0});
            else
                taps[o] = {{i0, 1.0 - f}, {i1, f}};
        }
    }
    return taps;
}

double bilinear(const Image& img, double sy, double sx, int c) {
    sy = std::clamp(sy, 0.0, img.height - 1.0);
    sx = std::clamp(sx, 0.0, img.width - 1.0);
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
    const double fy = sy - y0, fx = sx - x0;
    if (fy == 0.0 && fx == 0.0) return img.at(y0, x0, c);
    const double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
    const double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
    return top * (1 - fy) + bot * fy;
}

}  // namespace

Image resize(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ImageError("resize target must be positive");
    if (out_h == img.height && out_w == img.width) return img;
    const auto ty = axis_taps(img.height, out_h);
    const auto tx = axis_taps(img.width, out_w);
    Image tmp(img.height, out_w, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = 0.0;
                for (const Tap& t : tx[x]) v += t.weight * img.at(y, t.index, c);
                tmp.at(y, x, c) = v;
            }
    Image out(out_h, out_w, img.channels);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = 0.0;
                for (const Tap& t : ty[y]) v += t.weight * tmp.at(t.index, x, c);
                out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
    return out;
}

Image center_crop(const Image& img, int crop_h, int crop_w) {
    if (crop_h > img.height || crop_w > img.width) throw ImageError("crop larger than image");
    const int oy = (img.height - crop_h) / 2, ox = (img.width - crop_w) / 2;
    Image out(crop_h, crop_w, img.channels);
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y + oy, x + ox, c);
    return out;
}

Image clamp01(Image img) {
    for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
    return img;
}

Image preprocess_train(const Image& img, std::mt19937_64& rng, int target_res, const AugmentConfig& cfg) {
    if (target_res < 8) throw ImageError("target resolution must be >= 8");
    if (img.height <= 0 || img.width <= 0) throw ImageError("cannot preprocess an empty image");
    if (std::min(img.height, img.width) < cfg.min_source_edge)
        throw ImageError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                         " is smaller than the minimum croppable edge " + std::to_string(cfg.min_source_edge));
    if (cfg.scale_min <= 0 || cfg.scale_max < cfg.scale_min) throw ImageError("invalid augmentation scale range");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * unit(rng);
    const double angle = (2.0 * unit(rng) - 1.0) * cfg.max_rotation_deg * std::numbers::pi / 180.0;
    const double ux = unit(rng), uy = unit(rng);

    // Scaled image: shorter edge == target_res * scale.
    const double factor = target_res * scale / std::min(img.height, img.width);
    const double sh = img.height * factor, sw = img.width * factor;
    const double slack_y = sh - target_res, slack_x = sw - target_res;
    const double off_y = cfg.center_crop ? slack_y / 2 : slack_y * uy;
    const double off_x = cfg.center_crop ? slack_x / 2 : slack_x * ux;
    const double cy = sh / 2.0, cx = sw / 2.0;
    const double ca = std::cos(angle), sa = std::sin(angle);

    Image out(target_res, target_res, img.channels);
    for (int v = 0; v < target_res; ++v)
        for (int u = 0; u < target_res; ++u) {
            // Output pixel centre in scaled coordinates, rotated back about the centre.
            const double py = v + 0.5 + off_y - cy, px = u + 0.5 + off_x - cx;
            const double ry = ca * py - sa * px + cy, rx = sa * py + ca * px + cx;
            const double sy = ry / factor - 0.5, sx = rx / factor - 0.5;
            for (int c = 0; c < img.channels; ++c) out.at(v, u, c) = std::clamp(bilinear(img, sy, sx, c), 0.0, 1.0);
        }
    return out;
}

Image preprocess_eval(const Image& img, int resize_edge, int crop) {
    if (crop > resize_edge)
        throw std::invalid_argument("crop " + std::to_string(crop) + " exceeds resize edge " +
                                    std::to_string(resize_edge));
    if (img.height <= 0 || img.width <= 0) throw ImageError("cannot preprocess an empty image");
    int h, w;
    if (img.height <= img.width) {
        h = resize_edge;
        w = static_cast<int>(std::lround(static_cast<double>(img.width) * resize_edge / img.height));
    } else {
        w = resize_edge;
        h = static_cast<int>(std::lround(static_cast<double>(img.height) * resize_edge / img.width));
    }
    return center_crop(resize(img, h, w), crop, crop);
}

namespace {

Image from_mat(const cv::Mat& m) {
    if (m.empty()) throw ImageError("could not decode image");
    cv::Mat src = m;
    if (m.depth() != CV_8U && m.depth() != CV_16U) throw ImageError("unsupported image bit depth");
    const double maxv = m.depth() == CV_8U ? 255.0 : 65535.0;
    const int ch = m.channels() == 1 ? 1 : 3;
    Image im(m.rows, m.cols, ch);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            if (ch == 1) {
                im.at(y, x, 0) = (m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x)) / maxv;
                continue;
            }
            // OpenCV stores BGR(A).
            for (int c = 0; c < 3; ++c) {
                const int src_c = 2 - c;
                double v;
                if (m.depth() == CV_8U)
                    v = m.ptr<std::uint8_t>(y)[x * m.channels() + src_c];
                else
                    v = m.ptr<std::uint16_t>(y)[x * m.channels() + src_c];
                im.at(y, x, c) = v / maxv;
            }
        }
    return im;
}

cv::Mat to_mat(const Image& img) {
    img.validate();
    cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                const int dst_c = img.channels == 1 ? 0 : 2 - c;
                m.ptr<std::uint8_t>(y)[x * img.channels + dst_c] =
                    static_cast<std::uint8_t>(std::lround(img.at(y, x, c) * 255.0));
            }
    return m;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw ImageError("could not read image " + path.string());
    return from_mat(m);
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
    if (buf.empty()) throw ImageError("empty image payload");
    return from_mat(cv::imdecode(buf, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH));
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", to_mat(img), out)) throw ImageError("png encoding failed");
    return out;
}

void save_png(const Image& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ImageError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace latentlens
