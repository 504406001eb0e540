#pragma once

#include <filesystem>

#include "tokinsight/config.hpp"
#include "tokinsight/image.hpp"
#include "tokinsight/prediction.hpp"
#include "tokinsight/tensor.hpp"
#include "tokinsight/weights.hpp"

namespace tokinsight {

/// Patch embeddings with positional embeddings already added. Row k of
/// `embeddings` is patch token k (row-major over the patch grid).
struct TokenSequence {
    Tensor embeddings;  // [N x D]
    Tensor cls;         // [D]
};

struct Preprocess {
    Rgb mean = kImageNetMean;
    Rgb std = kImageNetStd;
};

/// Splits a [3 x H x W] image into non-overlapping P x P patches. Token 0 is
/// the top-left patch; each row is flattened channel-major, then row-major.
Tensor patchify(const Tensor& chw, const ViTConfig& config);

/// [cls; embeddings[retained...]] in retained-index order, shape [1+|S| x D].
Tensor gather_sequence(const TokenSequence& seq, const TokenSubset& subset);

/// An immutable ViT classifier. Every method is const and safe to call
/// concurrently from many threads.
class VitModel {
public:
    explicit VitModel(ViTWeights weights);

    const ViTConfig& config() const noexcept { return weights_.config; }
    const ViTWeights& weights() const noexcept { return weights_; }

    /// token k = patch_embed(patch_k) + pos_embed[k+1]; cls = cls_token + pos_embed[0].
    TokenSequence embed(const Tensor& patches) const;

    /// Runs the pre-norm encoder over [cls, retained tokens] only. Removed
    /// tokens take no part in attention; there is no mask placeholder.
    Prediction forward_subset(const TokenSequence& seq, const TokenSubset& subset) const;

    /// Encoder blocks plus the final norm over an explicit sequence whose row 0
    /// is the cls token. Returns the head logits read from row 0.
    Tensor forward_sequence(const Tensor& sequence) const;

    /// normalize -> patchify -> embed, for an image already at model resolution.
    TokenSequence tokenize(const InputImage& img, const Preprocess& pre = {}) const;

    /// resize -> normalize -> patchify -> embed -> forward_subset(full).
    Prediction predict(const InputImage& img, const Preprocess& pre = {}) const;

private:
    struct Projection {
        Tensor weight_t;  // [in x out]
        Tensor bias;
    };
    struct Block {
        Projection qkv, proj, fc1, fc2;
    };

    Tensor attention(const Tensor& x, const Block& block, const BlockWeights& bw) const;

    ViTWeights weights_;
    Projection patch_embed_;
    Projection head_;
    std::vector<Block> blocks_;
};

/// Reads a TNSA archive and validates it against `config`. When
/// `config.num_classes` is 0 the class count is taken from head.bias.
VitModel load_model(const std::filesystem::path& path, ViTConfig config);

}  // namespace tokinsight
