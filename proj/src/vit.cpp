#include "tokinsight/vit.hpp"

#include <cmath>
#include <string>

#include "tokinsight/archive.hpp"
#include "tokinsight/error.hpp"

namespace tokinsight {

Tensor patchify(const Tensor& chw, const ViTConfig& config) {
    const std::size_t size = config.image_size, p = config.patch_size;
    if (chw.rank() != 3 || chw.dim(0) != 3 || chw.dim(1) != size || chw.dim(2) != size) {
        throw Error(ErrorCode::ShapeMismatch, "patchify expects [3x" + std::to_string(size) + "x" +
                                                  std::to_string(size) + "], got " + shape_to_string(chw.shape()));
    }
    const std::size_t grid = config.grid();
    Tensor out({config.token_count(), config.patch_dim()});
    auto src = chw.data();
    for (std::size_t gy = 0; gy < grid; ++gy) {
        for (std::size_t gx = 0; gx < grid; ++gx) {
            float* dst = out.row(gy * grid + gx).data();
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t y = 0; y < p; ++y) {
                    const float* line = src.data() + (c * size + gy * p + y) * size + gx * p;
                    std::copy(line, line + p, dst + (c * p + y) * p);
                }
            }
        }
    }
    return out;
}

Tensor gather_sequence(const TokenSequence& seq, const TokenSubset& subset) {
    const std::size_t n = seq.embeddings.rows();
    if (subset.universe() != n) {
        throw Error(ErrorCode::InvalidArgument, "token subset is over " + std::to_string(subset.universe()) +
                                                    " tokens but the sequence has " + std::to_string(n));
    }
    const std::size_t d = seq.embeddings.cols();
    Tensor out({1 + subset.size(), d});
    std::copy(seq.cls.data().begin(), seq.cls.data().end(), out.row(0).begin());
    std::size_t r = 1;
    for (std::size_t k : subset.retained()) {
        auto src = seq.embeddings.row(k);
        std::copy(src.begin(), src.end(), out.row(r++).begin());
    }
    return out;
}

VitModel::VitModel(ViTWeights weights) : weights_(std::move(weights)) {
    auto projection = [](const Tensor& w, const Tensor& b) { return Projection{transpose(w), b}; };
    patch_embed_ = projection(weights_.patch_embed_weight, weights_.patch_embed_bias);
    head_ = projection(weights_.head_weight, weights_.head_bias);
    for (const auto& bw : weights_.blocks) {
        blocks_.push_back(Block{projection(bw.qkv_weight, bw.qkv_bias), projection(bw.proj_weight, bw.proj_bias),
                                projection(bw.fc1_weight, bw.fc1_bias), projection(bw.fc2_weight, bw.fc2_bias)});
    }
}

TokenSequence VitModel::embed(const Tensor& patches) const {
    const auto& c = config();
    if (patches.rank() != 2 || patches.dim(0) != c.token_count() || patches.dim(1) != c.patch_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "embed expects [" + std::to_string(c.token_count()) + "x" +
                                                  std::to_string(c.patch_dim()) + "] patches, got " +
                                                  shape_to_string(patches.shape()));
    }
    TokenSequence seq;
    seq.embeddings = linear_t(patches, patch_embed_.weight_t, patch_embed_.bias);
    for (std::size_t k = 0; k < c.token_count(); ++k) {
        auto row = seq.embeddings.row(k);
        auto pos = weights_.pos_embed.row(k + 1);
        for (std::size_t j = 0; j < c.dim; ++j) row[j] += pos[j];
    }
    seq.cls = weights_.cls_token;
    auto pos0 = weights_.pos_embed.row(0);
    for (std::size_t j = 0; j < c.dim; ++j) seq.cls[j] += pos0[j];
    return seq;
}

Tensor VitModel::attention(const Tensor& x, const Block& block, const BlockWeights& bw) const {
    const auto& c = config();
    const std::size_t t = x.rows(), d = c.dim, dh = c.head_dim();
    const Tensor normed = layer_norm(x, bw.ln1_weight, bw.ln1_bias);
    const Tensor qkv = linear_t(normed, block.qkv.weight_t, block.qkv.bias);  // [T x 3D]
    const float scale = std::sqrt(static_cast<float>(dh));

    Tensor mixed({t, d});
    Tensor scores({t, t});
    for (std::size_t h = 0; h < c.heads; ++h) {
        const std::size_t q_off = h * dh, k_off = d + h * dh, v_off = 2 * d + h * dh;
        for (std::size_t i = 0; i < t; ++i) {
            const float* q = qkv.row(i).data() + q_off;
            for (std::size_t j = 0; j < t; ++j) {
                const float* k = qkv.row(j).data() + k_off;
                float dot = 0.0f;
                for (std::size_t e = 0; e < dh; ++e) dot += q[e] * k[e];
                scores.at(i, j) = dot / scale;
            }
        }
        const Tensor weights = softmax_rows(scores);
        for (std::size_t i = 0; i < t; ++i) {
            float* out = mixed.row(i).data() + h * dh;
            for (std::size_t j = 0; j < t; ++j) {
                const float a = weights.at(i, j);
                const float* v = qkv.row(j).data() + v_off;
                for (std::size_t e = 0; e < dh; ++e) out[e] += a * v[e];
            }
        }
    }
    return linear_t(mixed, block.proj.weight_t, block.proj.bias);
}

Tensor VitModel::forward_sequence(const Tensor& sequence) const {
    const auto& c = config();
    if (sequence.rank() != 2 || sequence.cols() != c.dim || sequence.rows() == 0) {
        throw Error(ErrorCode::ShapeMismatch, "encoder input must be [T x " + std::to_string(c.dim) + "], got " +
                                                  shape_to_string(sequence.shape()));
    }
    Tensor x = sequence;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& block = blocks_[b];
        const auto& bw = weights_.blocks[b];
        add_inplace(x, attention(x, block, bw));
        Tensor hidden = gelu(linear_t(layer_norm(x, bw.ln2_weight, bw.ln2_bias), block.fc1.weight_t, block.fc1.bias));
        add_inplace(x, linear_t(hidden, block.fc2.weight_t, block.fc2.bias));
    }
    // only the cls row feeds the head
    Tensor cls({1, c.dim});
    std::copy(x.row(0).begin(), x.row(0).end(), cls.row(0).begin());
    cls = layer_norm(cls, weights_.ln_final_weight, weights_.ln_final_bias);
    return linear_t(cls, head_.weight_t, head_.bias).reshaped({c.num_classes});
}

Prediction VitModel::forward_subset(const TokenSequence& seq, const TokenSubset& subset) const {
    if (seq.embeddings.rows() != config().token_count()) {
        throw Error(ErrorCode::InvalidArgument, "token sequence has " + std::to_string(seq.embeddings.rows()) +
                                                    " tokens, config expects " +
                                                    std::to_string(config().token_count()));
    }
    return Prediction::from_logits(forward_sequence(gather_sequence(seq, subset)));
}

TokenSequence VitModel::tokenize(const InputImage& img, const Preprocess& pre) const {
    return embed(patchify(normalize(img, pre.mean, pre.std), config()));
}

Prediction VitModel::predict(const InputImage& img, const Preprocess& pre) const {
    const auto size = config().image_size;
    const InputImage resized = resize_bilinear(img, size, size);
    return forward_subset(tokenize(resized, pre), TokenSubset::full(config().token_count()));
}

VitModel load_model(const std::filesystem::path& path, ViTConfig config) {
    const TensorMap tensors = read_archive(path);
    if (config.num_classes == 0) {
        auto it = tensors.find("head.bias");
        if (it == tensors.end()) throw Error(ErrorCode::MissingKey, "missing weight 'head.bias'");
        config.num_classes = it->second.shape().front();
    }
    return VitModel(validate_vit_schema(tensors, config));
}

}  // namespace tokinsight
