#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cpalign/bbox.hpp"
#include "cpalign/image.hpp"

namespace cpalign {

enum class Domain { source, target, augmented };

std::string to_string(Domain d);
Domain domain_from_string(std::string_view s);

/// Whether an object was present in the original data or pasted in later.
enum class SourceFlag { original, pasted };

struct Annotation {
    int class_id = 0;
    BBox bbox;
    SourceFlag source_flag = SourceFlag::original;

    bool operator==(const Annotation&) const = default;
};

struct ImageRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    Image pixels;
    std::vector<Annotation> annotations;
    Domain domain = Domain::source;
};

struct DetectionDataset {
    std::vector<std::string> classes;
    std::vector<ImageRecord> images;
    Domain domain = Domain::source;

    int num_classes() const { return static_cast<int>(classes.size()); }
    const ImageRecord* find(std::string_view image_id) const;
};

/// Check every dataset invariant; throws ValidationError describing the first
/// violation. Called by load_dataset and before save_dataset.
void validate_dataset(const DetectionDataset& ds);

/// Load a dataset from a JSON manifest:
///   {"classes": [...], "images": [{"id", "image_path", "label_path", "domain"}]}
/// Label files hold normalized "class_id cx cy w h" lines which are converted
/// to pixel-space boxes. Relative paths resolve against the manifest directory.
DetectionDataset load_dataset(const std::filesystem::path& manifest_path, int threads = 1);

/// Write images/, labels/ and manifest.json under out_dir; returns the
/// manifest path. load(save(d)) is annotation-equivalent and pixel-identical
/// to d, and save(load(F)) reproduces F's label bytes.
std::filesystem::path save_dataset(const DetectionDataset& ds,
                                   const std::filesystem::path& out_dir);

/// Exactly k images selected per class (an image picked for two classes is
/// kept once). Fails if any class has fewer than k images containing it.
DetectionDataset sample_kshot(const DetectionDataset& ds, int k, std::uint64_t seed);

/// `count` distinct images, uniform without replacement.
DetectionDataset sample_random_images(const DetectionDataset& ds, int count, std::uint64_t seed);

}  // namespace cpalign
