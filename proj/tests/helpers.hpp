#pragma once

// Shared synthetic-fixture builders for the test suites.

#include <filesystem>
#include <string>
#include <vector>

#include "cpalign/dataset.hpp"
#include "cpalign/rng.hpp"

namespace cpalign::testing {

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cpalign_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Image flat_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img(w, h);
    for (int i = 0; i < w * h; ++i) {
        img.pixels[i * 3 + 0] = r;
        img.pixels[i * 3 + 1] = g;
        img.pixels[i * 3 + 2] = b;
    }
    return img;
}

inline Image noise_image(int w, int h, std::uint64_t seed) {
    Image img(w, h);
    Rng rng(seed);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.uniform_below(256));
    return img;
}

inline ImageRecord make_record(std::string id, int w, int h,
                               std::vector<Annotation> anns,
                               Domain domain = Domain::source,
                               std::uint64_t pixel_seed = 0) {
    ImageRecord rec;
    rec.image_id = std::move(id);
    rec.width = w;
    rec.height = h;
    rec.pixels = noise_image(w, h, pixel_seed ? pixel_seed : fnv1a64(rec.image_id));
    rec.annotations = std::move(anns);
    rec.domain = domain;
    return rec;
}

/// Aligned integer box helper.
inline Annotation ann(int class_id, double x0, double y0, double x1, double y1,
                      SourceFlag flag = SourceFlag::original) {
    return Annotation{class_id, BBox{x0, y0, x1, y1}, flag};
}

/// One image per entry; entry i holds `counts[i]` boxes of class `cls[i]`,
/// laid out on a grid so they never overlap. 64x64 images.
inline DetectionDataset grid_dataset(const std::vector<int>& cls,
                                     const std::vector<int>& counts,
                                     int num_classes, Domain domain = Domain::source) {
    DetectionDataset ds;
    for (int c = 0; c < num_classes; ++c) ds.classes.push_back("class" + std::to_string(c));
    ds.domain = domain;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        std::vector<Annotation> anns;
        for (int j = 0; j < counts[i]; ++j) {
            const int gx = (j % 6) * 10;
            const int gy = (j / 6) * 10;
            anns.push_back(ann(cls[i], gx + 1, gy + 1, gx + 8, gy + 8));
        }
        ds.images.push_back(make_record("img_" + std::to_string(i), 64, 64, std::move(anns),
                                        domain, 1000 + i));
    }
    return ds;
}

}  // namespace cpalign::testing
