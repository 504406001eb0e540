#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tokinsight/tensor.hpp"

namespace tokinsight {

/// RGB image, row-major HWC, values in [0, 1].
struct InputImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;

    static constexpr std::size_t channels = 3;

    InputImage() = default;
    InputImage(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h * 3, fill) {}

    float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    float at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

    bool operator==(const InputImage&) const = default;
};

using Rgb = std::array<float, 3>;

inline constexpr Rgb kImageNetMean = {0.485f, 0.456f, 0.406f};
inline constexpr Rgb kImageNetStd = {0.229f, 0.224f, 0.225f};

/// Decodes 8/16-bit PNG (via libpng) or binary PPM (P6). Grayscale is
/// promoted to RGB and alpha is dropped.
InputImage load_image(const std::filesystem::path& path);
InputImage decode_image(std::span<const std::uint8_t> bytes);
InputImage decode_ppm(std::span<const std::uint8_t> bytes);
InputImage decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ppm(const InputImage& img);
std::vector<std::uint8_t> encode_png(const InputImage& img);

/// Writes PNG for a ".png" extension and PPM otherwise.
void write_image(const InputImage& img, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centre alignment and edge clamping.
InputImage resize_bilinear(const InputImage& img, std::size_t width, std::size_t height);

/// Per-channel (x - mean) / std into a [3 x H x W] tensor.
Tensor normalize(const InputImage& img, const Rgb& mean = kImageNetMean, const Rgb& std = kImageNetStd);
InputImage denormalize(const Tensor& chw, const Rgb& mean = kImageNetMean, const Rgb& std = kImageNetStd);

Rgb channel_mean(const InputImage& img);

}  // namespace tokinsight
