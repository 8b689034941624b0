#include "multigrad/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "multigrad/errors.hpp"

namespace multigrad {

namespace {

std::size_t shape_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_count(shape_))
        throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data_[0] = v;
    return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

double Tensor::item() const {
    if (data_.size() != 1)
        throw ShapeError("item: tensor has " + std::to_string(data_.size()) + " elements");
    return data_[0];
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (bs.size() > as.size())
        throw ShapeError("elementwise_mul: b rank exceeds a rank");
    std::size_t off = as.size() - bs.size();
    for (std::size_t i = 0; i < bs.size(); ++i)
        if (as[off + i] != bs[i])
            throw ShapeError("elementwise_mul: shape " + shape_str(bs) +
                             " is not a suffix of " + shape_str(as));
    Tensor out = a;
    std::size_t bn = b.size();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i % bn];
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

Tensor sign(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = out[i] > 0.0 ? 1.0 : (out[i] < 0.0 ? -1.0 : 0.0);
    return out;
}

double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor sum_over_batch(const Tensor& a) {
    if (a.rank() == 0)
        throw ShapeError("sum_over_batch: rank-0 input");
    std::vector<std::size_t> out_shape(a.shape().begin() + 1, a.shape().end());
    Tensor out(out_shape);
    std::size_t inner = out.size();
    std::size_t batch = a.shape()[0];
    for (std::size_t bidx = 0; bidx < batch; ++bidx)
        for (std::size_t i = 0; i < inner; ++i) out[i] += a[bidx * inner + i];
    return out;
}

bool all_finite(const Tensor& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

} // namespace multigrad
