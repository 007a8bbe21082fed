#include "cpalign/mask.hpp"

#include <numeric>

#include "cpalign/error.hpp"

namespace cpalign {

void BinaryMask::set_rect(const PixelRect& r) {
    const int x0 = std::max(0, r.x0), x1 = std::min(width, r.x1);
    const int y0 = std::max(0, r.y0), y1 = std::min(height, r.y1);
    for (int y = y0; y < y1; ++y) {
        std::fill(bits.begin() + static_cast<std::size_t>(y) * width + x0,
                  bits.begin() + static_cast<std::size_t>(y) * width + x1,
                  static_cast<std::uint8_t>(1));
    }
}

std::int64_t BinaryMask::set_count() const {
    return std::accumulate(bits.begin(), bits.end(), std::int64_t{0});
}

BinaryMask build_object_mask(const ImageRecord& image) {
    BinaryMask mask(image.width, image.height);
    for (const auto& a : image.annotations) {
        mask.set_rect(pixel_footprint(a.bbox, image.width, image.height));
    }
    return mask;
}

namespace {

/// Inclusive-prefix integral of the mask; sum(x0,y0,x1,y1) in O(1).
struct Integral {
    int width, height;
    std::vector<std::uint32_t> sums;  // (width+1) x (height+1)

    explicit Integral(const BinaryMask& m) : width(m.width), height(m.height) {
        sums.assign(static_cast<std::size_t>(width + 1) * (height + 1), 0);
        for (int y = 0; y < height; ++y) {
            std::uint32_t row = 0;
            for (int x = 0; x < width; ++x) {
                row += m.bits[static_cast<std::size_t>(y) * width + x];
                sums[static_cast<std::size_t>(y + 1) * (width + 1) + (x + 1)] =
                    sums[static_cast<std::size_t>(y) * (width + 1) + (x + 1)] + row;
            }
        }
    }

    std::uint32_t rect_sum(int x0, int y0, int x1, int y1) const {
        const auto at = [&](int x, int y) {
            return sums[static_cast<std::size_t>(y) * (width + 1) + x];
        };
        return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
    }
};

std::vector<int> grid_positions(int extent, int patch, int stride) {
    std::vector<int> xs;
    const int last = extent - patch;
    for (int x = 0; x <= last; x += stride) xs.push_back(x);
    if (xs.empty() || xs.back() != last) xs.push_back(last);
    return xs;
}

}  // namespace

std::optional<BBox> find_empty_region(const BinaryMask& mask, int patch_w, int patch_h,
                                      int stride, Rng& rng) {
    if (patch_w < 1 || patch_h < 1)
        throw ValidationError("find_empty_region: patch dimensions must be positive");
    if (patch_w > mask.width || patch_h > mask.height)
        throw ValidationError("find_empty_region: patch (" + std::to_string(patch_w) + "x" +
                              std::to_string(patch_h) + ") larger than image (" +
                              std::to_string(mask.width) + "x" + std::to_string(mask.height) + ")");
    if (stride < 1) throw ValidationError("find_empty_region: stride must be >= 1");

    const Integral integral(mask);
    const std::vector<int> xs = grid_positions(mask.width, patch_w, stride);
    const std::vector<int> ys = grid_positions(mask.height, patch_h, stride);

    std::vector<std::pair<int, int>> candidates;
    for (const int y : ys) {
        for (const int x : xs) {
            if (integral.rect_sum(x, y, x + patch_w, y + patch_h) == 0) {
                candidates.emplace_back(x, y);
            }
        }
    }
    if (candidates.empty()) return std::nullopt;

    const auto [x, y] = candidates[rng.index(candidates.size())];
    return BBox{static_cast<double>(x), static_cast<double>(y),
                static_cast<double>(x + patch_w), static_cast<double>(y + patch_h)};
}

std::optional<BBox> find_empty_region(const BinaryMask& mask, int patch_w, int patch_h,
                                      std::uint64_t seed) {
    Rng rng(seed);
    return find_empty_region(mask, patch_w, patch_h, kDefaultSearchStride, rng);
}

}  // namespace cpalign
