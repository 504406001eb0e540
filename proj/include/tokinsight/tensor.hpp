#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tokinsight {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major float32 array with an explicit shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor from_rows(std::initializer_list<std::initializer_list<float>> rows);
    static Tensor vector(std::initializer_list<float> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    /// Size of the last axis; rows() is everything before it flattened.
    std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
    std::size_t rows() const { return cols() == 0 ? 0 : data_.size() / cols(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    std::span<float> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }
    float& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    float at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Kernels. All are pure; reductions run left to right in a fixed order.

/// a[m x k] * b[k x n]. `workers` splits output rows; the result is
/// bit-identical for every worker count.
Tensor matmul(const Tensor& a, const Tensor& b, unsigned workers = 1);

Tensor transpose(const Tensor& a);

/// Softmax over the last axis with max subtraction.
Tensor softmax_rows(const Tensor& x);

/// Per-slice normalization over the last axis, biased variance, then gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-6f);

/// Exact x * Phi(x) via erf.
Tensor gelu(const Tensor& x);
float gelu(float x);

/// x * w^T + b with w stored [n x k] and b [n].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Same contraction with the weight already transposed to [k x n]. Produces
/// bit-identical output to linear() for w_t == transpose(w).
Tensor linear_t(const Tensor& x, const Tensor& w_t, const Tensor& b);

/// Elementwise a += b for equal shapes.
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace tokinsight
