#include "latentlens/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace latentlens::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
    if (x.rank() != rank)
        throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " +
                         x.shape_string());
}

int flat_features(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("expected batched input, got " + x.shape_string());
    return static_cast<int>(x.size() / static_cast<std::size_t>(x.dim(0)));
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in, int out, Rng& rng, double init_scale) : in_(in), out_(out) {
    weight_ = {name + ".weight", Tensor({out, in}), Tensor({out, in}), true};
    bias_ = {name + ".bias", Tensor({out}), Tensor({out}), true};
    const double scale = init_scale > 0 ? init_scale : std::sqrt(2.0 / in);
    std::normal_distribution<double> nd(0.0, scale);
    for (double& w : weight_.value.storage()) w = nd(rng);
}

Tensor Dense::infer(const Tensor& x) const {
    const int n = x.dim(0);
    if (flat_features(x) != in_)
        throw ShapeError("dense " + weight_.name + ": expected " + std::to_string(in_) + " features, got " +
                         x.shape_string());
    Tensor y({n, out_});
    CMapMat X(x.data(), n, in_);
    CMapMat W(weight_.value.data(), out_, in_);
    MapMat Y(y.data(), n, out_);
    Y.noalias() = X * W.transpose();
    Eigen::Map<const Eigen::RowVectorXd> b(bias_.value.data(), out_);
    Y.rowwise() += b;
    return y;
}

Tensor Dense::forward(const Tensor& x) {
    input_shape_ = x.shape();
    input_ = x;
    return infer(x);
}

Tensor Dense::backward(const Tensor& g) {
    const int n = g.dim(0);
    CMapMat G(g.data(), n, out_);
    CMapMat X(input_.data(), n, in_);
    MapMat dW(weight_.grad.data(), out_, in_);
    dW.noalias() += G.transpose() * X;
    Eigen::Map<Eigen::RowVectorXd> db(bias_.grad.data(), out_);
    db += G.colwise().sum();
    Tensor dx(input_shape_);
    MapMat DX(dx.data(), n, in_);
    CMapMat W(weight_.value.data(), out_, in_);
    DX.noalias() = G * W;
    return dx;
}

void Dense::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    const int fan_in = in_ch * kernel * kernel;
    weight_ = {name + ".weight", Tensor({out_ch, fan_in}), Tensor({out_ch, fan_in}), true};
    bias_ = {name + ".bias", Tensor({out_ch}), Tensor({out_ch}), true};
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : weight_.value.storage()) w = nd(rng);
}

// Columns laid out as [in_ch*k*k, N*Ho*Wo] so the whole batch is one GEMM.
Tensor Conv2d::run(const Tensor& x, std::vector<double>* cols_out) const {
    require_rank(x, 4, "conv2d");
    if (x.dim(1) != in_ch_)
        throw ShapeError("conv2d " + weight_.name + ": expected " + std::to_string(in_ch_) +
                         " channels, got " + x.shape_string());
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = out_size(h), wo = out_size(w);
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d input too small: " + x.shape_string());
    const int rows = in_ch_ * kernel_ * kernel_;
    const std::size_t spatial = static_cast<std::size_t>(ho) * wo;
    const std::size_t ncols = spatial * n;
    std::vector<double> cols(static_cast<std::size_t>(rows) * ncols, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int c = 0; c < in_ch_; ++c) {
            for (int ki = 0; ki < kernel_; ++ki) {
                for (int kj = 0; kj < kernel_; ++kj) {
                    const int r = (c * kernel_ + ki) * kernel_ + kj;
                    double* dst = cols.data() + static_cast<std::size_t>(r) * ncols + s * spatial;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ki;
                        if (iy < 0 || iy >= h) continue;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kj;
                            if (ix < 0 || ix >= w) continue;
                            dst[oy * wo + ox] = x.at4(s, c, iy, ix);
                        }
                    }
                }
            }
        }
    }
    RowMat out(out_ch_, ncols);
    CMapMat W(weight_.value.data(), out_ch_, rows);
    CMapMat C(cols.data(), rows, static_cast<Eigen::Index>(ncols));
    out.noalias() = W * C;
    Tensor y({n, out_ch_, ho, wo});
    for (int s = 0; s < n; ++s)
        for (int oc = 0; oc < out_ch_; ++oc) {
            const double b = bias_.value[oc];
            const double* src = out.data() + static_cast<std::size_t>(oc) * ncols + s * spatial;
            double* dst = y.ptr4(s, oc, 0, 0);
            for (std::size_t i = 0; i < spatial; ++i) dst[i] = src[i] + b;
        }
    if (cols_out) *cols_out = std::move(cols);
    return y;
}

Tensor Conv2d::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor Conv2d::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return run(x, &cols_);
}

Tensor Conv2d::backward(const Tensor& g) {
    const int n = input_shape_[0], h = input_shape_[2], w = input_shape_[3];
    const int ho = g.dim(2), wo = g.dim(3);
    const int rows = in_ch_ * kernel_ * kernel_;
    const std::size_t spatial = static_cast<std::size_t>(ho) * wo;
    const std::size_t ncols = spatial * n;
    RowMat G(out_ch_, ncols);
    for (int s = 0; s < n; ++s)
        for (int oc = 0; oc < out_ch_; ++oc) {
            const double* src = g.ptr4(s, oc, 0, 0);
            double* dst = G.data() + static_cast<std::size_t>(oc) * ncols + s * spatial;
            std::copy(src, src + spatial, dst);
            bias_.grad[oc] += std::accumulate(src, src + spatial, 0.0);
        }
    CMapMat C(cols_.data(), rows, static_cast<Eigen::Index>(ncols));
    MapMat dW(weight_.grad.data(), out_ch_, rows);
    dW.noalias() += G * C.transpose();
    CMapMat W(weight_.value.data(), out_ch_, rows);
    RowMat dcols = W.transpose() * G;
    Tensor dx(input_shape_);
    for (int s = 0; s < n; ++s)
        for (int c = 0; c < in_ch_; ++c)
            for (int ki = 0; ki < kernel_; ++ki)
                for (int kj = 0; kj < kernel_; ++kj) {
                    const int r = (c * kernel_ + ki) * kernel_ + kj;
                    const double* src = dcols.data() + static_cast<std::size_t>(r) * ncols + s * spatial;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride_ - pad_ + ki;
                        if (iy < 0 || iy >= h) continue;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride_ - pad_ + kj;
                            if (ix < 0 || ix >= w) continue;
                            dx.at4(s, c, iy, ix) += src[oy * wo + ox];
                        }
                    }
                }
    return dx;
}

void Conv2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = {name + ".gamma", Tensor({channels}, 1.0), Tensor({channels}), true};
    beta_ = {name + ".beta", Tensor({channels}), Tensor({channels}), true};
    running_mean_ = {name + ".running_mean", Tensor({channels}), Tensor({channels}), false};
    running_var_ = {name + ".running_var", Tensor({channels}, 1.0), Tensor({channels}), false};
}

Tensor BatchNorm2d::infer(const Tensor& x) const {
    require_rank(x, 4, "batchnorm");
    if (x.dim(1) != channels_) throw ShapeError("batchnorm channel mismatch: " + x.shape_string());
    Tensor y = x;
    const int n = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    for (int c = 0; c < channels_; ++c) {
        const double scale = gamma_.value[c] / std::sqrt(running_var_.value[c] + eps_);
        const double shift = beta_.value[c] - running_mean_.value[c] * scale;
        for (int s = 0; s < n; ++s) {
            double* p = y.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) p[i] = p[i] * scale + shift;
        }
    }
    return y;
}

Tensor BatchNorm2d::forward(const Tensor& x) {
    require_rank(x, 4, "batchnorm");
    if (x.dim(1) != channels_) throw ShapeError("batchnorm channel mismatch: " + x.shape_string());
    const int n = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const double m = static_cast<double>(n * hw);
    xhat_ = Tensor(x.shape());
    inv_std_.assign(channels_, 0.0);
    Tensor y(x.shape());
    for (int c = 0; c < channels_; ++c) {
        double mean = 0.0;
        for (int s = 0; s < n; ++s) {
            const double* p = x.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) mean += p[i];
        }
        mean /= m;
        double var = 0.0;
        for (int s = 0; s < n; ++s) {
            const double* p = x.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
        }
        var /= m;
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        for (int s = 0; s < n; ++s) {
            const double* p = x.ptr4(s, c, 0, 0);
            double* xh = xhat_.ptr4(s, c, 0, 0);
            double* q = y.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) {
                xh[i] = (p[i] - mean) * inv;
                q[i] = gamma_.value[c] * xh[i] + beta_.value[c];
            }
        }
        const double unbiased = m > 1 ? var * m / (m - 1) : var;
        running_mean_.value[c] = momentum_ * running_mean_.value[c] + (1 - momentum_) * mean;
        running_var_.value[c] = momentum_ * running_var_.value[c] + (1 - momentum_) * unbiased;
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& g) {
    const int n = g.dim(0);
    const std::size_t hw = static_cast<std::size_t>(g.dim(2)) * g.dim(3);
    const double m = static_cast<double>(n * hw);
    Tensor dx(g.shape());
    for (int c = 0; c < channels_; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int s = 0; s < n; ++s) {
            const double* gp = g.ptr4(s, c, 0, 0);
            const double* xh = xhat_.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) {
                sum_g += gp[i];
                sum_gx += gp[i] * xh[i];
            }
        }
        gamma_.grad[c] += sum_gx;
        beta_.grad[c] += sum_g;
        const double k = gamma_.value[c] * inv_std_[c] / m;
        for (int s = 0; s < n; ++s) {
            const double* gp = g.ptr4(s, c, 0, 0);
            const double* xh = xhat_.ptr4(s, c, 0, 0);
            double* d = dx.ptr4(s, c, 0, 0);
            for (std::size_t i = 0; i < hw; ++i) d[i] = k * (m * gp[i] - sum_g - xh[i] * sum_gx);
        }
    }
    return dx;
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

// ---------------------------------------------------------------- activations

Tensor ReLU::infer(const Tensor& x) const {
    Tensor y = x;
    for (double& v : y.storage()) v = v > 0 ? v : 0.0;
    return y;
}
Tensor ReLU::forward(const Tensor& x) {
    input_ = x;
    return infer(x);
}
Tensor ReLU::backward(const Tensor& g) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (input_[i] <= 0) d[i] = 0.0;
    return d;
}

Tensor LeakyReLU::infer(const Tensor& x) const {
    Tensor y = x;
    for (double& v : y.storage()) v = v > 0 ? v : slope_ * v;
    return y;
}
Tensor LeakyReLU::forward(const Tensor& x) {
    input_ = x;
    return infer(x);
}
Tensor LeakyReLU::backward(const Tensor& g) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (input_[i] <= 0) d[i] *= slope_;
    return d;
}

Tensor Sigmoid::infer(const Tensor& x) const {
    Tensor y = x;
    for (double& v : y.storage()) v = sigmoid(v);
    return y;
}
Tensor Sigmoid::forward(const Tensor& x) {
    output_ = infer(x);
    return output_;
}
Tensor Sigmoid::backward(const Tensor& g) {
    Tensor d = g;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= output_[i] * (1.0 - output_[i]);
    return d;
}

// ---------------------------------------------------------------- pooling / resampling

Tensor MaxPool2::run(const Tensor& x, std::vector<std::size_t>* argmax) const {
    require_rank(x, 4, "maxpool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = (h + 1) / 2, wo = (w + 1) / 2;
    Tensor y({n, c, ho, wo});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int iy = 2 * oy + dy, ix = 2 * ox + dx;
                            if (iy >= h || ix >= w) continue;
                            const std::size_t idx =
                                ((static_cast<std::size_t>(s) * c + ch) * h + iy) * w + ix;
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    y[o] = best;
                    if (argmax) (*argmax)[o] = best_idx;
                }
    return y;
}

Tensor MaxPool2::infer(const Tensor& x) const { return run(x, nullptr); }
Tensor MaxPool2::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return run(x, &argmax_);
}
Tensor MaxPool2::backward(const Tensor& g) {
    Tensor dx(input_shape_);
    for (std::size_t i = 0; i < g.size(); ++i) dx[argmax_[i]] += g[i];
    return dx;
}

Tensor Upsample::infer(const Tensor& x) const {
    require_rank(x, 4, "upsample");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, out_h_, out_w_});
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < out_h_; ++oy) {
                const int iy = oy * h / out_h_;
                for (int ox = 0; ox < out_w_; ++ox) y.at4(s, ch, oy, ox) = x.at4(s, ch, iy, ox * w / out_w_);
            }
    return y;
}
Tensor Upsample::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return infer(x);
}
Tensor Upsample::backward(const Tensor& g) {
    Tensor dx(input_shape_);
    const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < out_h_; ++oy) {
                const int iy = oy * h / out_h_;
                for (int ox = 0; ox < out_w_; ++ox) dx.at4(s, ch, iy, ox * w / out_w_) += g.at4(s, ch, oy, ox);
            }
    return dx;
}

Tensor Reshape::infer(const Tensor& x) const {
    std::vector<int> s{x.dim(0)};
    s.insert(s.end(), trailing_.begin(), trailing_.end());
    return x.reshaped(std::move(s));
}
Tensor Reshape::forward(const Tensor& x) {
    input_shape_ = x.shape();
    return infer(x);
}
Tensor Reshape::backward(const Tensor& g) { return g.reshaped(input_shape_); }

// ---------------------------------------------------------------- minibatch discrimination

MinibatchDiscrimination::MinibatchDiscrimination(std::string name, int features, MbdConfig cfg, Rng& rng)
    : features_(features), cfg_(cfg) {
    if (cfg.kernels < 1 || cfg.kernel_dim < 1) throw std::invalid_argument("MbdConfig: B and C must be >= 1");
    const int cols = cfg.kernels * cfg.kernel_dim;
    kernel_ = {name + ".kernel", Tensor({features, cols}), Tensor({features, cols}), true};
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(features)));
    for (double& v : kernel_.value.storage()) v = nd(rng);
}

Tensor minibatch_closeness(const Tensor& x, const Tensor& kernel, const MbdConfig& cfg) {
    if (x.rank() != 2 || kernel.rank() != 2 || x.dim(1) != kernel.dim(0) ||
        kernel.dim(1) != cfg.kernels * cfg.kernel_dim)
        throw ShapeError("minibatch_closeness shape mismatch: features " + x.shape_string() + ", kernel " +
                         kernel.shape_string());
    const int n = x.dim(0), f = x.dim(1), cols = kernel.dim(1);
    RowMat m(n, cols);
    m.noalias() = CMapMat(x.data(), n, f) * CMapMat(kernel.data(), f, cols);
    Tensor o({n, cfg.kernels});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int b = 0; b < cfg.kernels; ++b) {
                double l1 = 0.0;
                for (int c = 0; c < cfg.kernel_dim; ++c) {
                    const int col = b * cfg.kernel_dim + c;
                    l1 += std::abs(m(i, col) - m(j, col));
                }
                const double e = std::exp(-l1);
                o[static_cast<std::size_t>(i) * cfg.kernels + b] += e;
                o[static_cast<std::size_t>(j) * cfg.kernels + b] += e;
            }
    return o;
}

Tensor MinibatchDiscrimination::run(const Tensor& x, Tensor* projected) const {
    if (x.rank() != 2 || x.dim(1) != features_)
        throw ShapeError("minibatch discrimination expects N x " + std::to_string(features_) + ", got " +
                         x.shape_string());
    const int n = x.dim(0);
    const Tensor o = minibatch_closeness(x, kernel_.value, cfg_);
    Tensor y({n, features_ + cfg_.kernels});
    for (int i = 0; i < n; ++i) {
        std::copy_n(x.data() + static_cast<std::size_t>(i) * features_, features_,
                    y.data() + static_cast<std::size_t>(i) * (features_ + cfg_.kernels));
        std::copy_n(o.data() + static_cast<std::size_t>(i) * cfg_.kernels, cfg_.kernels,
                    y.data() + static_cast<std::size_t>(i) * (features_ + cfg_.kernels) + features_);
    }
    if (projected) {
        const int cols = kernel_.value.dim(1);
        *projected = Tensor({n, cols});
        MapMat(projected->data(), n, cols).noalias() =
            CMapMat(x.data(), n, features_) * CMapMat(kernel_.value.data(), features_, cols);
    }
    return y;
}

Tensor MinibatchDiscrimination::infer(const Tensor& x) const { return run(x, nullptr); }

Tensor MinibatchDiscrimination::forward(const Tensor& x) {
    input_ = x;
    return run(x, &projected_);
}

Tensor MinibatchDiscrimination::backward(const Tensor& g) {
    const int n = input_.dim(0), f = features_, kb = cfg_.kernels, kc = cfg_.kernel_dim;
    const int cols = kb * kc, width = f + kb;
    Tensor dx({n, f});
    for (int i = 0; i < n; ++i)
        std::copy_n(g.data() + static_cast<std::size_t>(i) * width, f, dx.data() + static_cast<std::size_t>(i) * f);
    // dL/dM_{i,b,c} = sum_{j != i} e_ijb * -sign(M_ibc - M_jbc) * (g_ib + g_jb)
    RowMat dm = RowMat::Zero(n, cols);
    const auto& m = projected_;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int b = 0; b < kb; ++b) {
                double l1 = 0.0;
                for (int c = 0; c < kc; ++c) {
                    const int col = b * kc + c;
                    l1 += std::abs(m[static_cast<std::size_t>(i) * cols + col] - m[static_cast<std::size_t>(j) * cols + col]);
                }
                const double e = std::exp(-l1);
                const double gsum = g[static_cast<std::size_t>(i) * width + f + b] + g[static_cast<std::size_t>(j) * width + f + b];
                for (int c = 0; c < kc; ++c) {
                    const int col = b * kc + c;
                    const double diff = m[static_cast<std::size_t>(i) * cols + col] - m[static_cast<std::size_t>(j) * cols + col];
                    const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                    const double v = -e * sgn * gsum;
                    dm(i, col) += v;
                    dm(j, col) -= v;
                }
            }
    MapMat(kernel_.grad.data(), f, cols).noalias() += CMapMat(input_.data(), n, f).transpose() * dm;
    MapMat(dx.data(), n, f).noalias() += dm * CMapMat(kernel_.value.data(), f, cols).transpose();
    return dx;
}

void MinibatchDiscrimination::collect(std::vector<Parameter*>& out) { out.push_back(&kernel_); }

// ---------------------------------------------------------------- Sequential

Sequential::Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential tmp(other);
        layers_ = std::move(tmp.layers_);
    }
    return *this;
}

Tensor Sequential::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->infer(h);
    return h;
}

Tensor Sequential::backward(const Tensor& g) {
    Tensor d = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
}

void Sequential::collect(std::vector<Parameter*>& out) {
    for (auto& l : layers_) l->collect(out);
}

std::vector<Parameter*> parameters(Layer& layer) {
    std::vector<Parameter*> out;
    layer.collect(out);
    return out;
}

std::size_t parameter_count(Layer& layer) {
    std::size_t n = 0;
    for (auto* p : parameters(layer))
        if (p->trainable) n += p->value.size();
    return n;
}

void zero_grad(std::span<Parameter* const> params) {
    for (auto* p : params) p->grad.fill(0.0);
}

// ---------------------------------------------------------------- losses

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.size() != target.size())
        throw ShapeError("mse_loss size mismatch " + pred.shape_string() + " vs " + target.shape_string());
    LossResult r{0.0, Tensor(pred.shape())};
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.value += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.value /= n;
    return r;
}

LossResult bce_with_logits(const Tensor& logits, const Tensor& targets) {
    if (logits.size() != targets.size()) throw ShapeError("bce_with_logits size mismatch");
    LossResult r{0.0, Tensor(logits.shape())};
    const double n = static_cast<double>(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = logits[i], t = targets[i];
        // max(l,0) - l t + log(1 + exp(-|l|))
        r.value += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
        r.grad[i] = (sigmoid(l) - t) / n;
    }
    r.value /= n;
    return r;
}

// ---------------------------------------------------------------- Adam

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params)
        if (p->trainable) params_.push_back(p);
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& val = params_[k]->value.storage();
        const auto& g = params_[k]->grad.storage();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
            val[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

void Adam::zero_grad() { nn::zero_grad(params_); }

}  // namespace latentlens::nn
