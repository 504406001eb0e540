#pragma once

// Alternative ViT evaluation that keeps all N tokens in the sequence and
// masks removed ones out of attention: their keys get -inf logits and their
// values contribute nothing. Only the cls row is read out, so this must agree
// with the gather-based forward.

#include <cmath>
#include <limits>
#include <vector>

#include "tokinsight/tensor.hpp"
#include "tokinsight/vit.hpp"

namespace tokinsight::testing {

inline Tensor masked_logits(const VitModel& model, const TokenSequence& seq, const std::vector<bool>& present) {
    const auto& cfg = model.config();
    const auto& w = model.weights();
    const std::size_t n = cfg.token_count(), d = cfg.dim, dh = cfg.head_dim(), t = n + 1;

    Tensor x({t, d});
    for (std::size_t j = 0; j < d; ++j) x.at(0, j) = seq.cls[j];
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < d; ++j) x.at(k + 1, j) = seq.embeddings.at(k, j);

    // row 0 is cls and is never masked
    auto visible = [&](std::size_t row) { return row == 0 || present[row - 1]; };
    const float neg_inf = -std::numeric_limits<float>::infinity();

    for (const auto& bw : w.blocks) {
        const Tensor qkv = linear(layer_norm(x, bw.ln1_weight, bw.ln1_bias), bw.qkv_weight, bw.qkv_bias);
        Tensor mixed({t, d});
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            Tensor scores({t, t});
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < t; ++j) {
                    float dot = 0.0f;
                    for (std::size_t e = 0; e < dh; ++e) dot += qkv.at(i, h * dh + e) * qkv.at(j, d + h * dh + e);
                    scores.at(i, j) = visible(j) ? dot / std::sqrt(static_cast<float>(dh)) : neg_inf;
                }
            }
            const Tensor attn = softmax_rows(scores);
            for (std::size_t i = 0; i < t; ++i) {
                for (std::size_t j = 0; j < t; ++j) {
                    if (!visible(j)) continue;
                    for (std::size_t e = 0; e < dh; ++e) {
                        mixed.at(i, h * dh + e) += attn.at(i, j) * qkv.at(j, 2 * d + h * dh + e);
                    }
                }
            }
        }
        add_inplace(x, linear(mixed, bw.proj_weight, bw.proj_bias));
        const Tensor hidden = gelu(linear(layer_norm(x, bw.ln2_weight, bw.ln2_bias), bw.fc1_weight, bw.fc1_bias));
        add_inplace(x, linear(hidden, bw.fc2_weight, bw.fc2_bias));
    }
    Tensor cls({1, d});
    for (std::size_t j = 0; j < d; ++j) cls.at(0, j) = x.at(0, j);
    return linear(layer_norm(cls, w.ln_final_weight, w.ln_final_bias), w.head_weight, w.head_bias)
        .reshaped({cfg.num_classes});
}

}  // namespace tokinsight::testing
