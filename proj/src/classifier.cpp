#include "latentlens/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

#include "latentlens/metrics.hpp"

namespace latentlens {

int ClassScores::argmax() const {
    if (scores.empty()) throw std::logic_error("argmax of empty score vector");
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Prediction BlackBox::predict(const Image& image) const { return predict_batch(std::span<const Image>(&image, 1)).front(); }

std::vector<int> BlackBox::labels(std::span<const Image> images) const {
    std::vector<int> out;
    out.reserve(images.size());
    for (const auto& p : predict_batch(images)) out.push_back(p.label);
    return out;
}

CnnClassifier::CnnClassifier(ClassifierConfig cfg, ClassCatalog classes)
    : cfg_(std::move(cfg)), classes_(std::move(classes)) {
    if (classes_.size() < 2) throw std::invalid_argument("classifier needs at least two classes");
    nn::Rng rng(cfg_.seed);
    int ch = cfg_.channels, res = cfg_.input_res;
    for (std::size_t i = 0; i < cfg_.conv_filters.size(); ++i) {
        const int f = cfg_.conv_filters[i];
        net_.emplace<nn::Conv2d>("classifier.conv" + std::to_string(i + 1), ch, f, 3, 1, 1, rng);
        net_.emplace<nn::ReLU>();
        net_.emplace<nn::MaxPool2>();
        ch = f;
        res = (res + 1) / 2;
    }
    const int flat = ch * res * res;
    net_.emplace<nn::Reshape>(std::vector<int>{flat});
    net_.emplace<nn::Dense>("classifier.fc1", flat, cfg_.hidden, rng);
    net_.emplace<nn::ReLU>();
    net_.emplace<nn::Dense>("classifier.fc2", cfg_.hidden, classes_.size(), rng);
}

std::vector<Prediction> CnnClassifier::predict_batch(std::span<const Image> images) const {
    if (images.empty()) return {};
    for (const auto& im : images)
        if (im.height != cfg_.input_res || im.width != cfg_.input_res || im.channels != cfg_.channels)
            throw ShapeError("classifier expects " + std::to_string(cfg_.input_res) + "x" +
                             std::to_string(cfg_.input_res) + "x" + std::to_string(cfg_.channels) + " input, got " +
                             std::to_string(im.height) + "x" + std::to_string(im.width) + "x" +
                             std::to_string(im.channels));
    std::vector<Prediction> out;
    out.reserve(images.size());
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < images.size(); start += kChunk) {
        const auto part = images.subspan(start, std::min(kChunk, images.size() - start));
        const Tensor logits = net_.infer(to_tensor(part));
        const int k = logits.dim(1);
        for (std::size_t i = 0; i < part.size(); ++i) {
            Prediction p;
            p.scores.scores.resize(static_cast<std::size_t>(k));
            for (int c = 0; c < k; ++c) p.scores.scores[c] = nn::sigmoid(logits[i * k + c]);
            p.label = p.scores.argmax();
            out.push_back(std::move(p));
        }
    }
    return out;
}

CheckpointContainer CnnClassifier::to_checkpoint() {
    CheckpointContainer c("classifier");
    auto& m = c.metadata();
    m["input_res"] = cfg_.input_res;
    m["channels"] = cfg_.channels;
    m["conv_filters"] = cfg_.conv_filters;
    m["hidden"] = cfg_.hidden;
    m["class_codes"] = classes_.codes();
    m["seed"] = cfg_.seed;
    store_parameters(c, net_);
    return c;
}

CnnClassifier CnnClassifier::from_checkpoint(const CheckpointContainer& ckpt) {
    if (ckpt.kind() != "classifier") throw std::runtime_error("checkpoint is not a classifier");
    const auto& m = ckpt.metadata();
    ClassifierConfig cfg;
    cfg.input_res = m.at("input_res");
    cfg.channels = m.at("channels");
    cfg.conv_filters = m.at("conv_filters").get<std::vector<int>>();
    cfg.hidden = m.at("hidden");
    cfg.seed = m.at("seed");
    CnnClassifier model(cfg, ClassCatalog(m.at("class_codes").get<std::vector<std::string>>()));
    restore_parameters(ckpt, model.net_);
    return model;
}

double evaluate_balanced_accuracy(const BlackBox& bb, const Dataset& ds) {
    const auto images = ds.images();
    const auto preds = bb.labels(images);
    const auto truth = ds.labels();
    return balanced_accuracy(preds, truth);
}

ClassifierTraining train_classifier(const Dataset& train, const Dataset& val, const ClassifierConfig& cfg) {
    const auto counts = train.class_counts();
    std::vector<int> populated;
    std::vector<std::string> warnings;
    for (int c = 0; c < train.classes.size(); ++c) {
        if (counts[c] > 0)
            populated.push_back(c);
        else
            warnings.push_back("class " + train.classes.code(c) + " has no training images");
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    if (populated.size() < 2) throw std::invalid_argument("training data must contain at least two classes");

    CnnClassifier model(cfg, train.classes);
    auto params = nn::parameters(model.network());
    nn::Adam opt(params, cfg.learning_rate);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(train.classes.size()));
    for (std::size_t i = 0; i < train.samples.size(); ++i) by_class[train.samples[i].label].push_back(i);
    std::vector<std::size_t> order(train.samples.size());
    std::iota(order.begin(), order.end(), 0);

    const int k = train.classes.size();
    const int batch = std::max(1, std::min<int>(cfg.batch_size, static_cast<int>(train.samples.size())));
    const int steps = static_cast<int>((train.samples.size() + batch - 1) / batch);
    ClassifierTraining result{model, {}, 0.0, warnings};
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (int step = 0; step < steps; ++step) {
            std::vector<Image> images;
            Tensor targets({batch, k});
            for (int b = 0; b < batch; ++b) {
                std::size_t idx;
                if (cfg.oversample) {
                    const int cls = populated[std::uniform_int_distribution<std::size_t>(0, populated.size() - 1)(rng)];
                    const auto& pool = by_class[cls];
                    idx = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
                } else {
                    idx = order[(static_cast<std::size_t>(step) * batch + b) % order.size()];
                }
                const Sample& s = train.samples[idx];
                Image im = cfg.augment ? preprocess_train(s.image, rng, cfg.input_res, cfg.augmentation)
                                       : (s.image.height == cfg.input_res && s.image.width == cfg.input_res
                                              ? s.image
                                              : preprocess_eval(s.image, cfg.input_res, cfg.input_res));
                images.push_back(std::move(im));
                targets[static_cast<std::size_t>(b) * k + s.label] = 1.0;
            }
            opt.zero_grad();
            const Tensor logits = model.network().forward(to_tensor(images));
            const auto loss = nn::bce_with_logits(logits, targets);
            if (!std::isfinite(loss.value)) throw std::runtime_error("classifier training diverged (non-finite loss)");
            model.network().backward(loss.grad);
            opt.step();
            loss_sum += loss.value;
        }
        ClassifierEpoch e{epoch, loss_sum / steps, 0.0};
        if (!val.samples.empty()) e.val_balanced_accuracy = evaluate_balanced_accuracy(model, val);
        result.log.push_back(e);
    }
    result.model = std::move(model);
    result.val_balanced_accuracy = result.log.empty() ? 0.0 : result.log.back().val_balanced_accuracy;
    return result;
}

}  // namespace latentlens
