#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpalign/bbox.hpp"
#include "cpalign/dataset.hpp"
#include "cpalign/rng.hpp"

namespace cpalign {

/// Per-pixel occupancy grid over one host image. A set bit means some
/// existing or already-pasted box covers that pixel.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool test(int x, int y) const {
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set_rect(const PixelRect& r);
    std::int64_t set_count() const;
};

/// Mask with a bit set for every pixel inside at least one annotation box.
BinaryMask build_object_mask(const ImageRecord& image);

constexpr int kDefaultSearchStride = 8;

/// Uniformly pick a patch_w x patch_h placement whose pixels are all free.
/// Candidates lie on a stride grid plus the far edge, so the search reaches
/// the image borders. Returns nullopt when no free slot exists.
std::optional<BBox> find_empty_region(const BinaryMask& mask, int patch_w, int patch_h,
                                      int stride, Rng& rng);

/// Seed-based convenience wrapper with the default stride.
std::optional<BBox> find_empty_region(const BinaryMask& mask, int patch_w, int patch_h,
                                      std::uint64_t seed);

}  // namespace cpalign
