#include "tokinsight/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <string>

#include "tokinsight/archive.hpp"
#include "tokinsight/error.hpp"

namespace tokinsight {

namespace {

[[noreturn]] void decode_error(const std::string& what) {
    throw Error(ErrorCode::DecodeFailure, "image decode failed: " + what);
}

std::uint8_t to_u8(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Reads one whitespace-delimited PPM header token, skipping '#' comments.
std::size_t ppm_number(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) decode_error("PPM header is incomplete");
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > (1u << 24)) decode_error("PPM header value too large");
        ++pos;
    }
    return value;
}

// State shared with libpng across setjmp/longjmp.
struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t count) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->pos + count > state->bytes.size()) png_error(png, "unexpected end of data");
    std::memcpy(out, state->bytes.data() + state->pos, count);
    state->pos += count;
}

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* message = static_cast<std::string*>(png_get_error_ptr(png));
    if (message) *message = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

InputImage decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw Error(ErrorCode::UnsupportedFormat, "not a binary PPM (P6) file");
    }
    std::size_t pos = 2;
    const std::size_t width = ppm_number(bytes, pos);
    const std::size_t height = ppm_number(bytes, pos);
    const std::size_t maxval = ppm_number(bytes, pos);
    if (width == 0 || height == 0) decode_error("PPM has a zero dimension");
    if (maxval == 0 || maxval > 65535) decode_error("PPM maxval out of range");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) decode_error("PPM header is not terminated");
    ++pos;

    const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
    const std::size_t needed = width * height * 3 * sample_bytes;
    if (bytes.size() - pos < needed) decode_error("PPM pixel data is truncated");

    InputImage img(width, height);
    const auto max_sample = static_cast<float>(maxval);
    for (std::size_t i = 0; i < width * height * 3; ++i) {
        std::size_t v = bytes[pos + i * sample_bytes];
        if (sample_bytes == 2) v = (v << 8) | bytes[pos + i * 2 + 1];
        img.pixels[i] = std::min(1.0f, static_cast<float>(v) / max_sample);
    }
    return img;
}

InputImage decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw Error(ErrorCode::UnsupportedFormat, "not a PNG file");
    }
    std::string message = "corrupt PNG";
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
    if (!png) decode_error("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        decode_error("libpng initialisation failed");
    }

    PngReadState state{bytes, 0, {}, {}};
    png_uint_32 width = 0, height = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        decode_error(message);
    }
    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
        png_error(png, "unexpected row layout after transforms");
    }
    state.raw.resize(static_cast<std::size_t>(width) * height * 3);
    state.rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        state.rows[y] = state.raw.data() + static_cast<std::size_t>(y) * width * 3;
    }
    png_read_image(png, state.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    InputImage img(width, height);
    for (std::size_t i = 0; i < state.raw.size(); ++i) img.pixels[i] = static_cast<float>(state.raw[i]) / 255.0f;
    return img;
}

InputImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    throw Error(ErrorCode::UnsupportedFormat, "unsupported image format (expected PNG or binary PPM)");
}

InputImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_ppm(const InputImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (float v : img.pixels) out.push_back(to_u8(v));
    return out;
}

std::vector<std::uint8_t> encode_png(const InputImage& img) {
    std::vector<std::uint8_t> rgb(img.pixels.size());
    std::transform(img.pixels.begin(), img.pixels.end(), rgb.begin(), to_u8);

    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(img.width);
    desc.height = static_cast<png_uint_32>(img.height);
    desc.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + desc.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&desc, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + desc.message);
    }
    out.resize(size);
    return out;
}

void write_image(const InputImage& img, const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto bytes = ext == ".png" ? encode_png(img) : encode_ppm(img);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

InputImage resize_bilinear(const InputImage& img, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw Error(ErrorCode::InvalidArgument, "resize target must be at least 1x1");
    if (img.width == 0 || img.height == 0) throw Error(ErrorCode::InvalidArgument, "cannot resize an empty image");

    struct Tap {
        std::size_t lo, hi;
        float t;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> result(out);
        const float scale = static_cast<float>(in) / static_cast<float>(out);
        for (std::size_t i = 0; i < out; ++i) {
            float src = (static_cast<float>(i) + 0.5f) * scale - 0.5f;
            src = std::clamp(src, 0.0f, static_cast<float>(in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            result[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<float>(lo)};
        }
        return result;
    };
    auto lerp = [](float a, float b, float t) { return std::clamp(a + t * (b - a), std::min(a, b), std::max(a, b)); };

    const auto xs = taps(img.width, width);
    const auto ys = taps(img.height, height);
    InputImage out(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        const auto& ty = ys[y];
        for (std::size_t x = 0; x < width; ++x) {
            const auto& tx = xs[x];
            for (std::size_t c = 0; c < 3; ++c) {
                const float top = lerp(img.at(tx.lo, ty.lo, c), img.at(tx.hi, ty.lo, c), tx.t);
                const float bottom = lerp(img.at(tx.lo, ty.hi, c), img.at(tx.hi, ty.hi, c), tx.t);
                out.at(x, y, c) = lerp(top, bottom, ty.t);
            }
        }
    }
    return out;
}

Tensor normalize(const InputImage& img, const Rgb& mean, const Rgb& std) {
    for (float s : std) {
        if (!(s > 0.0f)) throw Error(ErrorCode::InvalidArgument, "normalization std must be positive");
    }
    const std::size_t plane = img.width * img.height;
    Tensor out({3, img.height, img.width});
    auto dst = out.data();
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) dst[c * plane + i] = (img.pixels[i * 3 + c] - mean[c]) / std[c];
    }
    return out;
}

InputImage denormalize(const Tensor& chw, const Rgb& mean, const Rgb& std) {
    if (chw.rank() != 3 || chw.dim(0) != 3) {
        throw Error(ErrorCode::ShapeMismatch, "denormalize expects [3xHxW], got " + shape_to_string(chw.shape()));
    }
    InputImage img(chw.dim(2), chw.dim(1));
    const std::size_t plane = img.width * img.height;
    auto src = chw.data();
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = src[c * plane + i] * std[c] + mean[c];
    }
    return img;
}

Rgb channel_mean(const InputImage& img) {
    Rgb mean = {0.0f, 0.0f, 0.0f};
    const std::size_t n = img.width * img.height;
    if (n == 0) return mean;
    std::array<double, 3> total = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 3; ++c) total[c] += img.pixels[i * 3 + c];
    for (std::size_t c = 0; c < 3; ++c) mean[c] = static_cast<float>(total[c] / static_cast<double>(n));
    return mean;
}

}  // namespace tokinsight
