#pragma once

// Minimal layer library: explicit forward/backward, double precision.
//
// forward() runs in training mode and caches what backward() needs;
// infer() is the const evaluation path and is safe to call concurrently.

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "latentlens/tensor.hpp"

namespace latentlens::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor infer(const Tensor& x) const = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(std::vector<Parameter*>& out) { (void)out; }
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual std::string kind() const = 0;
};

using Rng = std::mt19937_64;

class Dense final : public Layer {
public:
    Dense(std::string name, int in, int out, Rng& rng, double init_scale = 0.0);
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
    std::string kind() const override { return "dense"; }
    int in_features() const { return in_; }
    int out_features() const { return out_; }

private:
    int in_, out_;
    Parameter weight_, bias_;
    Tensor input_;
    std::vector<int> input_shape_;
};

// 2-D convolution over NCHW with square kernels and symmetric zero padding.
class Conv2d final : public Layer {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
    std::string kind() const override { return "conv2d"; }
    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }

private:
    Tensor run(const Tensor& x, std::vector<double>* cols_out) const;
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Parameter weight_, bias_;
    std::vector<double> cols_;
    std::vector<int> input_shape_;
};

// Batch normalization over channels. Running statistics follow
// running = momentum * running + (1 - momentum) * batch.
class BatchNorm2d final : public Layer {
public:
    BatchNorm2d(std::string name, int channels, double momentum = 0.95, double eps = 1e-3);
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
    std::string kind() const override { return "batchnorm"; }
    double momentum() const { return momentum_; }

private:
    int channels_;
    double momentum_, eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
    std::string kind() const override { return "relu"; }

private:
    Tensor input_;
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(double slope) : slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyReLU>(*this); }
    std::string kind() const override { return "leaky_relu"; }
    double slope() const { return slope_; }

private:
    double slope_;
    Tensor input_;
};

class Sigmoid final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor output_;
};

// 2x2 max pooling, stride 2; odd edges are kept (ceil mode).
class MaxPool2 final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
    std::string kind() const override { return "maxpool"; }

private:
    Tensor run(const Tensor& x, std::vector<std::size_t>* argmax) const;
    std::vector<std::size_t> argmax_;
    std::vector<int> input_shape_;
};

// Nearest-neighbour upsampling to a fixed spatial size.
class Upsample final : public Layer {
public:
    Upsample(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample>(*this); }
    std::string kind() const override { return "upsample"; }

private:
    int out_h_, out_w_;
    std::vector<int> input_shape_;
};

class Reshape final : public Layer {
public:
    explicit Reshape(std::vector<int> trailing) : trailing_(std::move(trailing)) {}
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }
    std::string kind() const override { return "reshape"; }

private:
    std::vector<int> trailing_;
    std::vector<int> input_shape_;
};

struct MbdConfig {
    int kernels = 16;     // B
    int kernel_dim = 5;   // C
};

// Minibatch discrimination. For input rows x_i (f features) projects
// M = x T with T of shape f x (B*C), then appends per kernel b
//   o_b(x_i) = sum_{j != i} exp(-|M_{i,b} - M_{j,b}|_1)
// giving an N x (f + B) output.
class MinibatchDiscrimination final : public Layer {
public:
    MinibatchDiscrimination(std::string name, int features, MbdConfig cfg, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<MinibatchDiscrimination>(*this);
    }
    std::string kind() const override { return "minibatch_discrimination"; }
    const MbdConfig& config() const { return cfg_; }
    const Tensor& kernel() const { return kernel_.value; }

private:
    Tensor run(const Tensor& x, Tensor* projected) const;
    int features_;
    MbdConfig cfg_;
    Parameter kernel_;
    Tensor input_, projected_;
};

// Closeness features alone (N x f in, N x B out) for a given projection kernel.
Tensor minibatch_closeness(const Tensor& features, const Tensor& kernel, const MbdConfig& cfg);

class Sequential final : public Layer {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    template <class L, class... Args>
    L& emplace(Args&&... args) {
        auto p = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *p;
        layers_.push_back(std::move(p));
        return ref;
    }

    Tensor forward(const Tensor& x) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }
    std::string kind() const override { return "sequential"; }

    std::size_t size() const { return layers_.size(); }
    Layer& at(std::size_t i) { return *layers_.at(i); }
    const Layer& at(std::size_t i) const { return *layers_.at(i); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

std::vector<Parameter*> parameters(Layer& layer);
std::size_t parameter_count(Layer& layer);
void zero_grad(std::span<Parameter* const> params);

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

// Mean squared error over every element.
LossResult mse_loss(const Tensor& pred, const Tensor& target);
// Mean binary cross-entropy on logits against targets in [0,1].
LossResult bce_with_logits(const Tensor& logits, const Tensor& targets);

double sigmoid(double x);

class Adam {
public:
    Adam(std::vector<Parameter*> params, double lr = 1e-3, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad();
    double learning_rate() const { return lr_; }

private:
    std::vector<Parameter*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace latentlens::nn
