#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace multigrad {

// Dense row-major n-dimensional array of doubles with value semantics.
// A rank-0 tensor holds exactly one element.
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Single value of a one-element tensor; throws ShapeError otherwise.
    double item() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise product. b must have the same shape as a, or a shape that is a
// suffix of a's shape, in which case b is tiled across a's leading axes.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);

// Same-shape elementwise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Elementwise sign with sign(0) = 0 (also for -0.0).
Tensor sign(const Tensor& a);

double l2_norm(const Tensor& a);
double dot(const Tensor& a, const Tensor& b); // same shape required

// Sum over axis 0; input must have rank >= 1.
Tensor sum_over_batch(const Tensor& a);

bool all_finite(const Tensor& a);

} // namespace multigrad
