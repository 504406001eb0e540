#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace tokinsight {

/// Geometry of a ViT classifier. The MLP hidden width is fixed at 4 * dim.
struct ViTConfig {
    std::size_t image_size = 224;
    std::size_t patch_size = 16;
    std::size_t dim = 768;
    std::size_t depth = 12;
    std::size_t heads = 12;
    std::size_t num_classes = 2;

    static constexpr std::size_t mlp_ratio = 4;

    std::size_t grid() const noexcept { return image_size / patch_size; }
    std::size_t token_count() const noexcept { return grid() * grid(); }
    std::size_t patch_dim() const noexcept { return patch_size * patch_size * 3; }
    std::size_t head_dim() const noexcept { return dim / heads; }
    std::size_t hidden_dim() const noexcept { return mlp_ratio * dim; }

    /// Throws Error(InvalidArgument) naming the violated constraint.
    void validate() const;

    bool operator==(const ViTConfig&) const = default;
};

/// "vitb16" -> 224/16/768/12/12, "tiny" -> 32/8/64/2/4; both with 2 classes.
std::optional<ViTConfig> config_preset(std::string_view name);

}  // namespace tokinsight
