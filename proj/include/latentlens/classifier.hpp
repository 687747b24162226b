#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentlens/checkpoint.hpp"
#include "latentlens/dataset.hpp"
#include "latentlens/image.hpp"
#include "latentlens/nn.hpp"

namespace latentlens {

// Independent per-class sigmoid scores; they need not sum to one.
struct ClassScores {
    std::vector<double> scores;
    // Index of the highest score, lowest index on ties.
    int argmax() const;
};

struct Prediction {
    ClassScores scores;
    int label = -1;
};

// Opaque classifier: everything downstream only sees predictions.
class BlackBox {
public:
    virtual ~BlackBox() = default;
    virtual int num_classes() const = 0;
    virtual int input_height() const = 0;
    virtual int input_width() const = 0;
    virtual int input_channels() const = 0;
    // Throws ShapeError when an image does not match the expected input.
    virtual std::vector<Prediction> predict_batch(std::span<const Image> images) const = 0;
    Prediction predict(const Image& image) const;
    std::vector<int> labels(std::span<const Image> images) const;
};

struct ClassifierConfig {
    int input_res = 28;
    int channels = 3;
    std::vector<int> conv_filters{8, 16};
    int hidden = 32;
    int epochs = 8;
    int batch_size = 32;
    double learning_rate = 2e-3;
    std::uint64_t seed = 1;
    bool augment = true;
    // Class-balanced batch sampling.
    bool oversample = true;
    AugmentConfig augmentation{15.0, 1.0, 1.1, false, 8};
};

// Small convolutional one-vs-rest classifier: (conv3x3, ReLU, maxpool) per
// entry of conv_filters, then dense-ReLU-dense to one logit per class.
class CnnClassifier final : public BlackBox {
public:
    CnnClassifier(ClassifierConfig cfg, ClassCatalog classes);

    int num_classes() const override { return classes_.size(); }
    int input_height() const override { return cfg_.input_res; }
    int input_width() const override { return cfg_.input_res; }
    int input_channels() const override { return cfg_.channels; }
    std::vector<Prediction> predict_batch(std::span<const Image> images) const override;

    const ClassCatalog& classes() const { return classes_; }
    const ClassifierConfig& config() const { return cfg_; }
    nn::Sequential& network() { return net_; }
    const nn::Sequential& network() const { return net_; }

    CheckpointContainer to_checkpoint();
    static CnnClassifier from_checkpoint(const CheckpointContainer& ckpt);

private:
    ClassifierConfig cfg_;
    ClassCatalog classes_;
    nn::Sequential net_;
};

struct ClassifierEpoch {
    int epoch = 0;
    double loss = 0.0;
    double val_balanced_accuracy = 0.0;
};

struct ClassifierTraining {
    CnnClassifier model;
    std::vector<ClassifierEpoch> log;
    double val_balanced_accuracy = 0.0;
    std::vector<std::string> warnings;
};

// One-vs-rest training with a binary cross-entropy term per class.
// Requires at least two populated classes; empty classes only warn.
ClassifierTraining train_classifier(const Dataset& train, const Dataset& val, const ClassifierConfig& cfg);

double evaluate_balanced_accuracy(const BlackBox& bb, const Dataset& ds);

}  // namespace latentlens
