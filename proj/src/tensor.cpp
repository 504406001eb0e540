#include "tokinsight/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "tokinsight/error.hpp"

namespace tokinsight {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor shape must have rank >= 1");
    for (auto d : shape) {
        if (d == 0) {
            throw Error(ErrorCode::ShapeMismatch, "tensor shape " + shape_to_string(shape) + " has a zero dimension");
        }
    }
}

void require_last_dim(const Tensor& t, std::size_t n, const char* what) {
    if (t.rank() == 0 || t.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected last dimension " + std::to_string(n) +
                                                  ", got shape " + shape_to_string(t.shape()));
    }
}

void require_vector(const Tensor& t, std::size_t n, const char* what) {
    if (t.rank() != 1 || t.dim(0) != n) {
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(what) + ": expected [" + std::to_string(n) + "], got " + shape_to_string(t.shape()));
    }
}

// Runs body(begin, end) over contiguous row ranges.
template <typename Body>
void for_row_ranges(std::size_t rows, unsigned workers, Body&& body) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(rows)));
    if (workers == 1) {
        body(std::size_t{0}, rows);
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (rows + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(rows, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&body, begin, end] { body(begin, end); });
    }
}

// out[r] = sum_k x[r][k] * w_t[k], accumulated k-ascending, for r in [begin, end).
void contract_rows(const float* x, const float* w_t, float* out, std::size_t k, std::size_t n, std::size_t begin,
                   std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
        float* dst = out + r * n;
        std::fill(dst, dst + n, 0.0f);
        const float* src = x + r * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float s = src[p];
            const float* wrow = w_t + p * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += s * wrow[j];
        }
    }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
        throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                  " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t n = rows.size() ? rows.begin()->size() : 0;
    std::vector<float> data;
    for (const auto& r : rows) {
        if (r.size() != n) throw Error(ErrorCode::ShapeMismatch, "ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), n}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<float> values) {
    return Tensor({values.size()}, std::vector<float>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b, unsigned workers) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw Error(ErrorCode::ShapeMismatch,
                    "matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    const float* x = a.data().data();
    const float* w = b.data().data();
    float* dst = out.data().data();
    for_row_ranges(m, workers, [&](std::size_t begin, std::size_t end) { contract_rows(x, w, dst, k, n, begin, end); });
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "transpose expects rank 2, got " + shape_to_string(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() == 0) throw Error(ErrorCode::ShapeMismatch, "softmax_rows: empty shape");
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const float peak = *std::max_element(row.begin(), row.end());
        float total = 0.0f;
        for (auto& v : row) {
            v = std::exp(v - peak);
            total += v;
        }
        for (auto& v : row) v /= total;
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (!(eps > 0.0f)) throw Error(ErrorCode::InvalidArgument, "layer_norm: eps must be positive");
    const std::size_t d = x.cols();
    require_vector(gamma, d, "layer_norm gamma");
    require_vector(beta, d, "layer_norm beta");
    Tensor out = x;
    const float inv_d = 1.0f / static_cast<float>(d);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        float mean = 0.0f;
        for (float v : row) mean += v;
        mean *= inv_d;
        float var = 0.0f;
        for (float v : row) var += (v - mean) * (v - mean);
        var *= inv_d;
        const float inv_std = 1.0f / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean) * inv_std * gamma[j] + beta[j];
    }
    return out;
}

float gelu(float x) {
    return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2)));
}

Tensor gelu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v = gelu(v);
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "linear: weight must be rank 2, got " + shape_to_string(w.shape()));
    const std::size_t n = w.dim(0), k = w.dim(1);
    require_last_dim(x, k, "linear input");
    require_vector(b, n, "linear bias");
    Shape out_shape = x.shape();
    out_shape.back() = n;
    Tensor out(out_shape);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto src = x.row(r);
        auto dst = out.row(r);
        for (std::size_t j = 0; j < n; ++j) {
            auto wrow = w.row(j);
            float acc = 0.0f;
            for (std::size_t p = 0; p < k; ++p) acc += src[p] * wrow[p];
            dst[j] = acc + b[j];
        }
    }
    return out;
}

Tensor linear_t(const Tensor& x, const Tensor& w_t, const Tensor& b) {
    if (w_t.rank() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "linear: weight must be rank 2, got " + shape_to_string(w_t.shape()));
    }
    const std::size_t k = w_t.dim(0), n = w_t.dim(1);
    require_last_dim(x, k, "linear input");
    require_vector(b, n, "linear bias");
    Shape out_shape = x.shape();
    out_shape.back() = n;
    Tensor out(out_shape);
    contract_rows(x.data().data(), w_t.data().data(), out.data().data(), k, n, 0, x.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto dst = out.row(r);
        for (std::size_t j = 0; j < n; ++j) dst[j] += b[j];
    }
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "add: shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) + " differ");
    }
    auto dst = a.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace tokinsight
