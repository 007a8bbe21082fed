#include "cpalign/augment.hpp"

#include <cmath>
#include <vector>

#include "cpalign/error.hpp"

namespace cpalign {

void AugmentParams::validate() const {
    if (!(intensity_scale_lo > 0.0) || !(intensity_scale_lo <= intensity_scale_hi))
        throw ValidationError("AugmentParams: need 0 < intensity_scale_lo <= intensity_scale_hi");
    if (!(blur_sigma_lo >= 0.0) || !(blur_sigma_lo <= blur_sigma_hi))
        throw ValidationError("AugmentParams: need 0 <= blur_sigma_lo <= blur_sigma_hi");
}

namespace {

/// Mirror index i into [0, len) without repeating the edge sample.
int reflect_index(int i, int len) {
    if (len == 1) return 0;
    const int period = 2 * (len - 1);
    i = std::abs(i) % period;
    return i < len ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::uint8_t to_u8(double v) {
    const double clamped = std::min(255.0, std::max(0.0, v));
    return static_cast<std::uint8_t>(std::llround(clamped));
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
    if (img.width <= 0 || img.height <= 0) throw ValidationError("gaussian_blur: empty image");
    if (sigma <= 0.0) return img;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (radius == 0) return img;
    const std::vector<double> kernel = gaussian_kernel(sigma, radius);

    const int w = img.width, h = img.height;
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);

    // horizontal pass
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    const int xx = reflect_index(x + t, w);
                    acc += kernel[t + radius] * img.at(xx, y)[c];
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
            }
        }
    }

    // vertical pass
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    const int yy = reflect_index(y + t, h);
                    acc += kernel[t + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
                }
                out.at(x, y)[c] = to_u8(acc);
            }
        }
    }
    return out;
}

Image scale_intensity(const Image& img, double s) {
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[i] = to_u8(static_cast<double>(img.pixels[i]) * s);
    }
    return out;
}

Image augment_patch(const Image& patch, const AugmentParams& params, Rng& rng) {
    if (patch.width <= 0 || patch.height <= 0)
        throw ValidationError("augment_patch: empty patch");
    params.validate();
    const double s = rng.uniform(params.intensity_scale_lo, params.intensity_scale_hi);
    const double sigma = rng.uniform(params.blur_sigma_lo, params.blur_sigma_hi);
    return gaussian_blur(scale_intensity(patch, s), sigma);
}

Image augment_patch(const Image& patch, const AugmentParams& params) {
    Rng rng(params.seed);
    return augment_patch(patch, params, rng);
}

ImageRecord paste_object(const ImageRecord& host, const Image& patch, const BBox& location,
                         int class_id) {
    const int x0 = static_cast<int>(std::llround(location.x_min));
    const int y0 = static_cast<int>(std::llround(location.y_min));
    const int x1 = static_cast<int>(std::llround(location.x_max));
    const int y1 = static_cast<int>(std::llround(location.y_max));
    if (x1 - x0 != patch.width || y1 - y0 != patch.height)
        throw ValidationError("paste_object: location size does not match patch size");
    if (x0 < 0 || y0 < 0 || x1 > host.width || y1 > host.height)
        throw ValidationError("paste_object: location out of bounds");

    ImageRecord out = host;
    blit(out.pixels, patch, x0, y0);
    out.annotations.push_back(Annotation{class_id, location, SourceFlag::pasted});
    return out;
}

ImageRecord inject_target_cell(const ImageRecord& host, const DetectionDataset& target,
                               const AugmentParams& params, Rng& rng, BinaryMask& mask,
                               const InjectOptions& opts) {
    params.validate();
    if (opts.max_tries < 1) throw ValidationError("inject_target_cell: max_tries must be >= 1");

    std::vector<const ImageRecord*> annotated;
    for (const auto& rec : target.images) {
        if (!rec.annotations.empty()) annotated.push_back(&rec);
    }
    if (annotated.empty())
        throw ValidationError("inject_target_cell: target dataset has no annotated images");

    for (int attempt = 0; attempt < opts.max_tries; ++attempt) {
        const ImageRecord& donor = *annotated[rng.index(annotated.size())];
        const Annotation& cell = donor.annotations[rng.index(donor.annotations.size())];
        const PixelRect rect = pixel_footprint(cell.bbox, donor.width, donor.height);
        if (rect.empty()) continue;
        Image patch = crop(donor.pixels, rect);
        if (opts.augment_cell) patch = augment_patch(patch, params, rng);
        if (patch.width > mask.width || patch.height > mask.height) continue;

        const auto slot = find_empty_region(mask, patch.width, patch.height, opts.stride, rng);
        if (!slot) continue;

        ImageRecord out = paste_object(host, patch, *slot, cell.class_id);
        mask.set_rect(pixel_footprint(*slot, mask.width, mask.height));
        return out;
    }
    throw PlacementError("inject_target_cell: no empty region found for image '" + host.image_id +
                         "' after " + std::to_string(opts.max_tries) + " tries");
}

ImageRecord inject_target_cell(const ImageRecord& host, const DetectionDataset& target,
                               const AugmentParams& params) {
    Rng rng(params.seed);
    BinaryMask mask = build_object_mask(host);
    return inject_target_cell(host, target, params, rng, mask);
}

}  // namespace cpalign
