#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cpalign/bbox.hpp"

namespace cpalign {

/// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::uint8_t* at(int x, int y) {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const Image&) const = default;
};

/// Decode a PNG (8-bit RGB/RGBA, non-interlaced) or binary PPM (P6) file.
/// Format is detected from the file magic, not the extension.
Image read_image(const std::filesystem::path& path);

/// Encode as PNG or PPM depending on the extension (.png / .ppm).
/// Deterministic: identical pixels always produce identical bytes.
void write_image(const Image& img, const std::filesystem::path& path);

Image decode_image(const std::vector<std::uint8_t>& bytes, const std::string& origin);
std::vector<std::uint8_t> encode_png(const Image& img);
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// Copy of the pixels inside `r` (must be non-empty and within bounds).
Image crop(const Image& src, const PixelRect& r);

/// Overwrite the rectangle starting at (x, y) with `patch`. Must fit.
void blit(Image& host, const Image& patch, int x, int y);

}  // namespace cpalign
