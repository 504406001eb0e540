#include "tokinsight/config.hpp"

#include <string>

#include "tokinsight/error.hpp"

namespace tokinsight {

void ViTConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "invalid ViT config: " + what); };
    if (patch_size == 0) fail("patch_size must be positive");
    if (image_size == 0) fail("image_size must be positive");
    if (image_size % patch_size != 0) {
        fail("image_size " + std::to_string(image_size) + " is not divisible by patch_size " + std::to_string(patch_size));
    }
    if (depth == 0) fail("depth must be >= 1");
    if (heads == 0) fail("heads must be >= 1");
    if (num_classes == 0) fail("num_classes must be >= 1");
    if (dim == 0 || dim % heads != 0) {
        fail("dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
    }
}

std::optional<ViTConfig> config_preset(std::string_view name) {
    if (name == "vitb16") return ViTConfig{224, 16, 768, 12, 12, 2};
    if (name == "tiny") return ViTConfig{32, 8, 64, 2, 4, 2};
    return std::nullopt;
}

}  // namespace tokinsight
