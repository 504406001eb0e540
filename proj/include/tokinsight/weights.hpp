#pragma once

#include <string>
#include <vector>

#include "tokinsight/archive.hpp"
#include "tokinsight/config.hpp"
#include "tokinsight/tensor.hpp"

namespace tokinsight {

struct BlockWeights {
    Tensor ln1_weight, ln1_bias;
    Tensor qkv_weight, qkv_bias;    // [3D, D], [3D]; rows are q, k, v, each split into heads
    Tensor proj_weight, proj_bias;  // [D, D], [D]
    Tensor ln2_weight, ln2_bias;
    Tensor fc1_weight, fc1_bias;    // [4D, D], [4D]
    Tensor fc2_weight, fc2_bias;    // [D, 4D], [D]
};

/// The canonical parameter set, checked against a ViTConfig.
struct ViTWeights {
    ViTConfig config;
    Tensor patch_embed_weight;  // [D, P*P*3]
    Tensor patch_embed_bias;    // [D]
    Tensor cls_token;           // [D]
    Tensor pos_embed;           // [N+1, D]; row 0 belongs to the cls token
    std::vector<BlockWeights> blocks;
    Tensor ln_final_weight, ln_final_bias;
    Tensor head_weight;  // [M, D]
    Tensor head_bias;    // [M]
};

/// Canonical key -> expected shape, in a stable order.
std::vector<std::pair<std::string, Shape>> vit_schema(const ViTConfig& config);

/// Checks presence and shape of every canonical key and rejects unknown
/// keys. Errors name the offending key (MissingKey, SchemaShape).
ViTWeights validate_vit_schema(const TensorMap& tensors, const ViTConfig& config);

/// Flattens weights back into canonical names.
NamedTensors to_named_tensors(const ViTWeights& weights);

}  // namespace tokinsight
