#pragma once

// Closed-form subset classifiers for exhaustive tests.

#include <cmath>
#include <random>
#include <vector>

#include "tokinsight/attribution.hpp"

namespace tokinsight::testing {

/// Two classes: p(1) = sum of the retained weights, p(0) = 1 - p(1).
class AdditiveStub final : public SubsetClassifier {
public:
    explicit AdditiveStub(std::vector<float> weights) : weights_(std::move(weights)) {}

    std::size_t token_count() const override { return weights_.size(); }
    Prediction evaluate(const TokenSubset& subset) const override {
        float p1 = 0.0f;
        for (std::size_t k : subset.retained()) p1 += weights_[k];
        return Prediction::from_probs(Tensor::vector({1.0f - p1, p1}));
    }

private:
    std::vector<float> weights_;
};

/// Two classes: p(1) = 0.5 + 0.5 * (retained weight / total weight). Class 1
/// stays on top until the last token is gone, so the search runs to the end.
class ShareStub final : public SubsetClassifier {
public:
    explicit ShareStub(std::vector<float> weights) : weights_(std::move(weights)) {
        for (float w : weights_) total_ += w;
    }

    std::size_t token_count() const override { return weights_.size(); }
    Prediction evaluate(const TokenSubset& subset) const override {
        float kept = 0.0f;
        for (std::size_t k : subset.retained()) kept += weights_[k];
        const float p1 = 0.5f + 0.5f * (kept / total_);
        return Prediction::from_probs(Tensor::vector({1.0f - p1, p1}));
    }

private:
    std::vector<float> weights_;
    float total_ = 0.0f;
};

/// Returns the same prediction for every subset.
class ConstantStub final : public SubsetClassifier {
public:
    ConstantStub(std::size_t n, std::vector<float> probs) : n_(n), probs_(std::move(probs)) {}

    std::size_t token_count() const override { return n_; }
    Prediction evaluate(const TokenSubset&) const override {
        return Prediction::from_probs(Tensor({probs_.size()}, probs_));
    }

private:
    std::size_t n_;
    std::vector<float> probs_;
};

/// Two classes driven by a handful of key tokens: p(1) rises with the
/// fraction of key tokens present, with a small additive term from the rest.
class KeyedStub final : public SubsetClassifier {
public:
    KeyedStub(std::vector<bool> is_key, std::vector<float> weights)
        : is_key_(std::move(is_key)), weights_(std::move(weights)) {
        for (std::size_t k = 0; k < is_key_.size(); ++k) {
            keys_ += is_key_[k] ? 1 : 0;
            total_ += weights_[k];
        }
    }

    std::size_t token_count() const override { return weights_.size(); }
    Prediction evaluate(const TokenSubset& subset) const override {
        float present_keys = 0.0f, mass = 0.0f;
        for (std::size_t k : subset.retained()) {
            if (is_key_[k]) present_keys += 1.0f;
            mass += weights_[k];
        }
        const float key_share = keys_ ? present_keys / static_cast<float>(keys_) : 0.0f;
        const float p1 = 0.15f + 0.6f * key_share + 0.2f * (mass / total_);
        return Prediction::from_probs(Tensor::vector({1.0f - p1, p1}));
    }

private:
    std::vector<bool> is_key_;
    std::vector<float> weights_;
    std::size_t keys_ = 0;
    float total_ = 0.0f;
};

/// M classes with per-token logit contributions summed over retained tokens.
class SoftmaxStub final : public SubsetClassifier {
public:
    SoftmaxStub(std::size_t n, std::size_t classes, std::vector<float> bias, std::vector<float> contributions)
        : n_(n), classes_(classes), bias_(std::move(bias)), contributions_(std::move(contributions)) {}

    std::size_t token_count() const override { return n_; }
    Prediction evaluate(const TokenSubset& subset) const override {
        std::vector<float> logits = bias_;
        for (std::size_t k : subset.retained())
            for (std::size_t c = 0; c < classes_; ++c) logits[c] += contributions_[k * classes_ + c];
        return Prediction::from_logits(Tensor({classes_}, logits));
    }

private:
    std::size_t n_, classes_;
    std::vector<float> bias_;
    std::vector<float> contributions_;
};

}  // namespace tokinsight::testing
