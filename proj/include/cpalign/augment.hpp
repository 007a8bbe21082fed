#pragma once

#include <cstdint>

#include "cpalign/dataset.hpp"
#include "cpalign/mask.hpp"
#include "cpalign/rng.hpp"

namespace cpalign {

/// Visual augmentation parameters: multiplicative intensity jitter followed
/// by Gaussian blur with a randomly drawn sigma.
struct AugmentParams {
    double intensity_scale_lo = 0.8;
    double intensity_scale_hi = 1.2;
    double blur_sigma_lo = 0.0;   // pixels
    double blur_sigma_hi = 1.5;   // pixels
    std::uint64_t seed = 0;

    void validate() const;
};

/// Gaussian blur with a truncated kernel of radius ceil(3*sigma) and
/// mirrored borders. sigma <= 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);

/// Multiply all channels by s and clamp to [0, 255].
Image scale_intensity(const Image& img, double s);

/// blur(clamp(img * s)) with s ~ U[intensity range], sigma ~ U[blur range]
/// drawn from `rng` in that order.
Image augment_patch(const Image& patch, const AugmentParams& params, Rng& rng);

/// Convenience overload seeding a fresh stream from params.seed.
Image augment_patch(const Image& patch, const AugmentParams& params);

/// Replace the pixels inside `location` (an integer-aligned box matching the
/// patch dimensions) and append a pasted annotation for class_id. Existing
/// annotations are untouched.
ImageRecord paste_object(const ImageRecord& host, const Image& patch, const BBox& location,
                         int class_id);

struct InjectOptions {
    int max_tries = 32;        // donor-cell resamples before giving up
    bool augment_cell = true;  // visually augment the injected cell
    int stride = kDefaultSearchStride;
};

/// Cut one random annotated cell from the target set, augment it, and paste
/// it into a free slot of `host`, sharing (and updating) `mask`. Throws
/// PlacementError after max_tries donors fail to fit; `host` is not modified
/// in that case.
ImageRecord inject_target_cell(const ImageRecord& host, const DetectionDataset& target,
                               const AugmentParams& params, Rng& rng, BinaryMask& mask,
                               const InjectOptions& opts = {});

/// Standalone form: fresh stream from params.seed, occupancy mask built from
/// the host's own annotations.
ImageRecord inject_target_cell(const ImageRecord& host, const DetectionDataset& target,
                               const AugmentParams& params);

}  // namespace cpalign
