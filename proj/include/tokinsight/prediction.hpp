#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokinsight/tensor.hpp"

namespace tokinsight {

/// Retained patch-token indices, strictly increasing, drawn from [0, universe).
/// The cls token is never part of a subset; it is always kept.
class TokenSubset {
public:
    TokenSubset() = default;

    static TokenSubset full(std::size_t universe);
    /// Sorts the given indices; throws InvalidArgument on duplicates or
    /// indices outside [0, universe).
    static TokenSubset of(std::vector<std::size_t> indices, std::size_t universe);

    std::size_t universe() const noexcept { return universe_; }
    std::size_t size() const noexcept { return retained_.size(); }
    bool empty() const noexcept { return retained_.empty(); }
    std::span<const std::size_t> retained() const noexcept { return retained_; }
    bool contains(std::size_t token) const;

    /// Copy with `token` removed; throws InvalidArgument if it is not retained.
    TokenSubset without(std::size_t token) const;

    bool operator==(const TokenSubset&) const = default;

private:
    std::size_t universe_ = 0;
    std::vector<std::size_t> retained_;
};

struct Prediction {
    Tensor logits;  // [M]
    Tensor probs;   // [M], softmax of logits
    std::size_t top_class = 0;
    float confidence = 0.0f;

    static Prediction from_logits(Tensor logits);
    static Prediction from_probs(Tensor probs);

    float prob(std::size_t cls) const { return probs[cls]; }
    std::size_t num_classes() const noexcept { return probs.size(); }
};

}  // namespace tokinsight
