#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace meldiff {

// Dense row-major tensor of doubles. Shapes are small (rank <= 4 in practice);
// all storage is contiguous and owned.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::initializer_list<int64_t> shape);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, double value);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // Reinterpret the buffer with a new shape of identical element count.
    Tensor reshaped(std::vector<int64_t> shape) const;

    void fill(double value);
    void zero() { fill(0.0); }

    // this += a * scale
    void add_scaled(const Tensor& a, double scale);
    void scale(double s);

    bool all_finite() const;

    double min() const;
    double max() const;
    double mean() const;

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Elementwise c = a + b / c = a - b, shape-checked.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);

// a . b over all elements.
double dot(const Tensor& a, const Tensor& b);
// Sum of squared elements.
double sum_sq(const Tensor& a);

} // namespace meldiff
