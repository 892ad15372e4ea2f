#include "meldiff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "meldiff/errors.hpp"

namespace meldiff {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw InvalidArgument("tensor dimension must be non-negative");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::initializer_list<int64_t> shape) : Tensor(std::vector<int64_t>(shape)) {}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
    if (shape_numel(shape) != size())
        throw InvalidArgument("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_scaled(const Tensor& a, double scale) {
    if (!same_shape(a)) throw InvalidArgument("add_scaled: shape mismatch");
    const double* src = a.data();
    double* dst = data();
    for (int64_t i = 0; i < size(); ++i) dst[i] += scale * src[i];
}

void Tensor::scale(double s) {
    for (double& v : data_) v *= s;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Tensor::mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw InvalidArgument("add: shape mismatch");
    Tensor c(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw InvalidArgument("sub: shape mismatch");
    Tensor c(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

Tensor mul_scalar(const Tensor& a, double s) {
    Tensor c(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) c[i] = a[i] * s;
    return c;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw InvalidArgument("dot: shape mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sum_sq(const Tensor& a) {
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

} // namespace meldiff
