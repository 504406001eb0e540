#include "tokinsight/prediction.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tokinsight/error.hpp"

namespace tokinsight {

TokenSubset TokenSubset::full(std::size_t universe) {
    TokenSubset s;
    s.universe_ = universe;
    s.retained_.resize(universe);
    std::iota(s.retained_.begin(), s.retained_.end(), std::size_t{0});
    return s;
}

TokenSubset TokenSubset::of(std::vector<std::size_t> indices, std::size_t universe) {
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
        throw Error(ErrorCode::InvalidArgument, "token subset contains duplicate indices");
    }
    if (!indices.empty() && indices.back() >= universe) {
        throw Error(ErrorCode::InvalidArgument, "token index " + std::to_string(indices.back()) +
                                                    " is outside [0, " + std::to_string(universe) + ")");
    }
    TokenSubset s;
    s.universe_ = universe;
    s.retained_ = std::move(indices);
    return s;
}

bool TokenSubset::contains(std::size_t token) const {
    return std::binary_search(retained_.begin(), retained_.end(), token);
}

TokenSubset TokenSubset::without(std::size_t token) const {
    auto it = std::lower_bound(retained_.begin(), retained_.end(), token);
    if (it == retained_.end() || *it != token) {
        throw Error(ErrorCode::InvalidArgument, "token " + std::to_string(token) + " is not retained");
    }
    TokenSubset s;
    s.universe_ = universe_;
    s.retained_.reserve(retained_.size() - 1);
    s.retained_.insert(s.retained_.end(), retained_.begin(), it);
    s.retained_.insert(s.retained_.end(), it + 1, retained_.end());
    return s;
}

Prediction Prediction::from_logits(Tensor logits) {
    if (logits.rank() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "logits must be a vector, got " + shape_to_string(logits.shape()));
    }
    Tensor probs = softmax_rows(logits);
    Prediction p = from_probs(std::move(probs));
    p.logits = std::move(logits);
    return p;
}

Prediction Prediction::from_probs(Tensor probs) {
    if (probs.rank() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "probabilities must be a vector, got " + shape_to_string(probs.shape()));
    }
    Prediction p;
    auto values = probs.data();
    // first maximum wins, so ties resolve to the lowest class index
    p.top_class = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    p.confidence = values[p.top_class];
    p.probs = std::move(probs);
    return p;
}

}  // namespace tokinsight
