#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentlens/image.hpp"

namespace latentlens {

// Ordered, unique class codes; a label is an index into this list.
class ClassCatalog {
public:
    ClassCatalog() = default;
    explicit ClassCatalog(std::vector<std::string> codes);

    int size() const { return static_cast<int>(codes_.size()); }
    const std::string& code(int id) const { return codes_.at(static_cast<std::size_t>(id)); }
    std::optional<int> find(const std::string& code) const;
    const std::vector<std::string>& codes() const { return codes_; }

    // The eight diagnostic categories of the ISIC 2019 challenge (UNK excluded).
    static ClassCatalog isic2019();

private:
    std::vector<std::string> codes_;
};

struct Sample {
    std::string id;
    Image image;
    int label = -1;
};

struct Dataset {
    ClassCatalog classes;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    std::vector<int> labels() const;
    std::vector<Image> images() const;
    std::vector<std::size_t> class_counts() const;
};

// Reads a CSV manifest next to the images. Two layouts are accepted:
//   filename,label            (categorical; codes taken from the label column)
//   image,MEL,NV,...          (one-hot; codes taken from the header)
// The ".png"/".jpg" extension may be omitted from filenames.
Dataset load_manifest(const std::filesystem::path& csv, const std::filesystem::path& image_dir = {});

// Writes images as PNG plus a categorical manifest.csv.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Resizes every image (used to feed lower-resolution training stages).
Dataset resized(const Dataset& ds, int res);

// Deterministic stratified split; returns (train, val).
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

// Synthetic four-class RGB dataset: a coloured blob on a textured
// background, class given by shape and hue (disc, square, ring, cross).
Dataset make_blob_dataset(int count, int res, std::uint64_t seed);

}  // namespace latentlens
