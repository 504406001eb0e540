#include "tokinsight/weights.hpp"

#include <set>

#include "tokinsight/error.hpp"

namespace tokinsight {

namespace {

std::string block_key(std::size_t i, const char* suffix) {
    return "blocks." + std::to_string(i) + "." + suffix;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> vit_schema(const ViTConfig& c) {
    const std::size_t d = c.dim, h = c.hidden_dim();
    std::vector<std::pair<std::string, Shape>> schema = {
        {"patch_embed.weight", {d, c.patch_dim()}},
        {"patch_embed.bias", {d}},
        {"cls_token", {d}},
        {"pos_embed", {c.token_count() + 1, d}},
    };
    for (std::size_t i = 0; i < c.depth; ++i) {
        schema.emplace_back(block_key(i, "ln1.weight"), Shape{d});
        schema.emplace_back(block_key(i, "ln1.bias"), Shape{d});
        schema.emplace_back(block_key(i, "attn.qkv.weight"), Shape{3 * d, d});
        schema.emplace_back(block_key(i, "attn.qkv.bias"), Shape{3 * d});
        schema.emplace_back(block_key(i, "attn.proj.weight"), Shape{d, d});
        schema.emplace_back(block_key(i, "attn.proj.bias"), Shape{d});
        schema.emplace_back(block_key(i, "ln2.weight"), Shape{d});
        schema.emplace_back(block_key(i, "ln2.bias"), Shape{d});
        schema.emplace_back(block_key(i, "mlp.fc1.weight"), Shape{h, d});
        schema.emplace_back(block_key(i, "mlp.fc1.bias"), Shape{h});
        schema.emplace_back(block_key(i, "mlp.fc2.weight"), Shape{d, h});
        schema.emplace_back(block_key(i, "mlp.fc2.bias"), Shape{d});
    }
    schema.emplace_back("ln_final.weight", Shape{d});
    schema.emplace_back("ln_final.bias", Shape{d});
    schema.emplace_back("head.weight", Shape{c.num_classes, d});
    schema.emplace_back("head.bias", Shape{c.num_classes});
    return schema;
}

ViTWeights validate_vit_schema(const TensorMap& tensors, const ViTConfig& config) {
    config.validate();
    const auto schema = vit_schema(config);
    std::set<std::string> known;
    for (const auto& [name, expected] : schema) {
        known.insert(name);
        auto it = tensors.find(name);
        if (it == tensors.end()) throw Error(ErrorCode::MissingKey, "missing weight '" + name + "'");
        if (it->second.shape() != expected) {
            std::string msg = "weight '" + name + "': expected shape " + shape_to_string(expected) + ", found " +
                              shape_to_string(it->second.shape());
            if (name == "pos_embed") {
                msg += " (" + std::to_string(config.token_count()) + " patch positions plus 1 cls slot)";
            }
            throw Error(ErrorCode::SchemaShape, msg);
        }
    }
    for (const auto& [name, tensor] : tensors) {
        if (!known.contains(name)) throw Error(ErrorCode::SchemaShape, "unexpected weight '" + name + "' for this config");
    }

    auto get = [&](const std::string& key) { return tensors.at(key); };
    ViTWeights w;
    w.config = config;
    w.patch_embed_weight = get("patch_embed.weight");
    w.patch_embed_bias = get("patch_embed.bias");
    w.cls_token = get("cls_token");
    w.pos_embed = get("pos_embed");
    for (std::size_t i = 0; i < config.depth; ++i) {
        BlockWeights b;
        b.ln1_weight = get(block_key(i, "ln1.weight"));
        b.ln1_bias = get(block_key(i, "ln1.bias"));
        b.qkv_weight = get(block_key(i, "attn.qkv.weight"));
        b.qkv_bias = get(block_key(i, "attn.qkv.bias"));
        b.proj_weight = get(block_key(i, "attn.proj.weight"));
        b.proj_bias = get(block_key(i, "attn.proj.bias"));
        b.ln2_weight = get(block_key(i, "ln2.weight"));
        b.ln2_bias = get(block_key(i, "ln2.bias"));
        b.fc1_weight = get(block_key(i, "mlp.fc1.weight"));
        b.fc1_bias = get(block_key(i, "mlp.fc1.bias"));
        b.fc2_weight = get(block_key(i, "mlp.fc2.weight"));
        b.fc2_bias = get(block_key(i, "mlp.fc2.bias"));
        w.blocks.push_back(std::move(b));
    }
    w.ln_final_weight = get("ln_final.weight");
    w.ln_final_bias = get("ln_final.bias");
    w.head_weight = get("head.weight");
    w.head_bias = get("head.bias");
    return w;
}

NamedTensors to_named_tensors(const ViTWeights& w) {
    NamedTensors out = {
        {"patch_embed.weight", w.patch_embed_weight},
        {"patch_embed.bias", w.patch_embed_bias},
        {"cls_token", w.cls_token},
        {"pos_embed", w.pos_embed},
    };
    for (std::size_t i = 0; i < w.blocks.size(); ++i) {
        const auto& b = w.blocks[i];
        out.emplace_back(block_key(i, "ln1.weight"), b.ln1_weight);
        out.emplace_back(block_key(i, "ln1.bias"), b.ln1_bias);
        out.emplace_back(block_key(i, "attn.qkv.weight"), b.qkv_weight);
        out.emplace_back(block_key(i, "attn.qkv.bias"), b.qkv_bias);
        out.emplace_back(block_key(i, "attn.proj.weight"), b.proj_weight);
        out.emplace_back(block_key(i, "attn.proj.bias"), b.proj_bias);
        out.emplace_back(block_key(i, "ln2.weight"), b.ln2_weight);
        out.emplace_back(block_key(i, "ln2.bias"), b.ln2_bias);
        out.emplace_back(block_key(i, "mlp.fc1.weight"), b.fc1_weight);
        out.emplace_back(block_key(i, "mlp.fc1.bias"), b.fc1_bias);
        out.emplace_back(block_key(i, "mlp.fc2.weight"), b.fc2_weight);
        out.emplace_back(block_key(i, "mlp.fc2.bias"), b.fc2_bias);
    }
    out.emplace_back("ln_final.weight", w.ln_final_weight);
    out.emplace_back("ln_final.bias", w.ln_final_bias);
    out.emplace_back("head.weight", w.head_weight);
    out.emplace_back("head.bias", w.head_bias);
    return out;
}

}  // namespace tokinsight
