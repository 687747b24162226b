#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentlens {

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dense row-major tensor of doubles. Images travel as NCHW.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, double fill = 0.0);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at4(int n, int c, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at4(int n, int c, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    double* ptr4(int n, int c, int h, int w) { return &at4(n, c, h, w); }
    const double* ptr4(int n, int c, int h, int w) const {
        return data_.data() + ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    // Same data, new shape; element count must match.
    Tensor reshaped(std::vector<int> shape) const;
    void reshape(std::vector<int> shape);

    // Rows [begin, end) along the leading axis.
    Tensor slice_rows(int begin, int end) const;
    static Tensor stack_rows(std::span<const Tensor> rows);

    void fill(double v);
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

    bool all_finite() const;
    std::string shape_string() const;

    static std::size_t count(const std::vector<int>& shape);

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace latentlens
