#include <cmath>
#include <random>

#include "doctest.h"
#include "tokinsight/error.hpp"
#include "tokinsight/tensor.hpp"

using namespace tokinsight;

namespace {

Tensor random_tensor(Shape shape, std::mt19937& rng) {
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("matmul with identity returns the input") {
    std::mt19937 rng(1);
    const Tensor a = random_tensor({5, 4}, rng);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0f;
    CHECK(matmul(a, eye) == a);
}

TEST_CASE("matmul on a hand-computed product") {
    const Tensor a = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
    const Tensor b = Tensor::from_rows({{7, 8}, {9, 10}, {11, 12}});
    CHECK(matmul(a, b) == Tensor::from_rows({{58, 64}, {139, 154}}));
}

TEST_CASE("matmul agrees with a naive triple loop in double") {
    std::mt19937 rng(2);
    const Tensor a = random_tensor({7, 13}, rng);
    const Tensor b = random_tensor({13, 5}, rng);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 13; ++k) ref += double(a.at(i, k)) * double(b.at(k, j));
            CHECK(c.at(i, j) == doctest::Approx(ref).epsilon(1e-5));
        }
    }
}

TEST_CASE("matmul output is bit-identical across worker counts") {
    std::mt19937 rng(3);
    const Tensor a = random_tensor({33, 17}, rng);
    const Tensor b = random_tensor({17, 9}, rng);
    const Tensor one = matmul(a, b, 1);
    for (unsigned w : {2u, 3u, 8u, 64u}) CHECK(matmul(a, b, w) == one);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({4, 2})), Error);
}

TEST_CASE("softmax rows sum to one and handle extreme values") {
    const Tensor s = softmax_rows(Tensor::from_rows({{1, 2, 3}, {1000, 1000, 1000}, {-1e30f, 0, 0}}));
    for (std::size_t r = 0; r < 3; ++r) {
        float sum = 0.0f;
        for (float v : s.row(r)) sum += v;
        CHECK(sum == doctest::Approx(1.0f));
    }
    CHECK(s.at(0, 2) == doctest::Approx(0.66524096f));
    CHECK(s.at(1, 0) == doctest::Approx(1.0f / 3.0f));
    CHECK(s.at(2, 0) == 0.0f);
    CHECK(s.at(2, 1) == doctest::Approx(0.5f));

    const float inf = std::numeric_limits<float>::infinity();
    const Tensor masked = softmax_rows(Tensor::from_rows({{-inf, 0.0f, -inf}}));
    CHECK(masked.at(0, 0) == 0.0f);
    CHECK(masked.at(0, 1) == 1.0f);
}

TEST_CASE("layer_norm matches a double-precision oracle") {
    std::mt19937 rng(4);
    const Tensor x = random_tensor({3, 10}, rng);
    const Tensor g = random_tensor({10}, rng);
    const Tensor b = random_tensor({10}, rng);
    const Tensor y = layer_norm(x, g, b);
    for (std::size_t r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 10; ++j) mean += x.at(r, j);
        mean /= 10.0;
        for (std::size_t j = 0; j < 10; ++j) var += (x.at(r, j) - mean) * (x.at(r, j) - mean);
        var /= 10.0;
        for (std::size_t j = 0; j < 10; ++j) {
            const double ref = (x.at(r, j) - mean) / std::sqrt(var + 1e-6) * g[j] + b[j];
            CHECK(y.at(r, j) == doctest::Approx(ref).epsilon(1e-5));
        }
    }
}

TEST_CASE("layer_norm of a constant row is the bias") {
    const Tensor y = layer_norm(Tensor({1, 4}, 3.0f), Tensor({4}, 2.0f), Tensor::vector({1, 2, 3, 4}));
    CHECK(y == Tensor::from_rows({{1, 2, 3, 4}}));
}

TEST_CASE("gelu uses the exact erf form") {
    CHECK(gelu(0.0f) == 0.0f);
    CHECK(gelu(1.0f) == doctest::Approx(0.841345f).epsilon(1e-6));
    CHECK(gelu(-1.0f) == doctest::Approx(-0.158655f).epsilon(1e-5));
    CHECK(gelu(3.0f) == doctest::Approx(2.9959502f).epsilon(1e-6));
}

TEST_CASE("linear equals matmul with the transposed weight plus bias") {
    std::mt19937 rng(5);
    const Tensor x = random_tensor({4, 6}, rng);
    const Tensor w = random_tensor({3, 6}, rng);
    const Tensor b = random_tensor({3}, rng);
    const Tensor y = linear(x, w, b);
    const Tensor xw = matmul(x, transpose(w));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(y.at(i, j) == xw.at(i, j) + b[j]);
    CHECK(linear_t(x, transpose(w), b) == y);
}

TEST_CASE("zero-sized dimensions are rejected") {
    CHECK_THROWS_AS(Tensor({0, 3}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), Error);
}
