#include "latentlens/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace latentlens {

std::size_t Tensor::count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(count(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size())
        throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
}

void Tensor::reshape(std::vector<int> shape) {
    if (count(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_string() + " to a different element count");
    shape_ = std::move(shape);
}

Tensor Tensor::slice_rows(int begin, int end) const {
    if (shape_.empty() || begin < 0 || end > shape_[0] || begin > end)
        throw ShapeError("slice_rows out of range on " + shape_string());
    std::vector<int> s = shape_;
    s[0] = end - begin;
    const std::size_t row = data_.size() / std::max(1, shape_[0]);
    std::vector<double> d(data_.begin() + static_cast<std::ptrdiff_t>(row * begin),
                          data_.begin() + static_cast<std::ptrdiff_t>(row * end));
    return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::stack_rows(std::span<const Tensor> rows) {
    if (rows.empty()) throw ShapeError("stack_rows on empty list");
    std::vector<int> s = rows.front().shape();
    int n = 0;
    std::vector<double> d;
    d.reserve(rows.front().size() * rows.size());
    for (const auto& r : rows) {
        if (r.shape().size() != s.size() ||
            !std::equal(r.shape().begin() + 1, r.shape().end(), s.begin() + 1))
            throw ShapeError("stack_rows shape mismatch");
        n += r.shape()[0];
        d.insert(d.end(), r.storage().begin(), r.storage().end());
    }
    s[0] = n;
    return Tensor(std::move(s), std::move(d));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.size() != size()) throw ShapeError("tensor += size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ']';
    return os.str();
}

}  // namespace latentlens
