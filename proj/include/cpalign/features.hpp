#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpalign/bbox.hpp"
#include "cpalign/dataset.hpp"

namespace cpalign {

/// Dense per-level activation map, channel-major float32.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;  // [c][y][x]

    FeatureMap() = default;
    FeatureMap(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    void validate() const;
};

/// Ground-truth box attached to a feature record. Domain tags where the
/// pixels came from, which downstream losses group by.
struct InstanceLabel {
    int class_id = 0;
    BBox bbox;
    Domain domain = Domain::source;

    bool operator==(const InstanceLabel& o) const {
        return class_id == o.class_id && bbox == o.bbox && domain == o.domain;
    }
};

inline constexpr int kNumFeatureLevels = 3;

/// One image's worth of activations: exactly three pyramid levels plus the
/// boxes to pool from them.
struct MultiLevelFeatures {
    std::string image_id;
    int image_w = 0;
    int image_h = 0;
    std::vector<FeatureMap> levels;
    std::vector<InstanceLabel> gt;

    void validate() const;
};

/// Stream a batch of records to `path`. Layout per record: one JSON header
/// line with shapes and boxes, then the raw float32 payload of each level in
/// order. Non-finite values are rejected.
void write_feature_dump(const std::filesystem::path& path,
                        const std::vector<MultiLevelFeatures>& records);

/// Inverse of write_feature_dump; round trips bit-exactly. Throws ParseError
/// on bad magic, malformed headers, or truncated payloads and ValidationError
/// on non-finite values or a wrong level count.
std::vector<MultiLevelFeatures> read_feature_dump(const std::filesystem::path& path);

/// Corner-aligned bilinear resample to size x size. Exact on constant maps
/// and the identity when size matches the input.
FeatureMap upsample_level(const FeatureMap& level, int size);

inline constexpr int kDefaultPoolGrid = 64;

/// One pooled vector: the mean activation over the grid cells a box covers at
/// one level.
struct InstanceFeature {
    std::string image_id;
    int instance_index = 0;  // position in MultiLevelFeatures::gt
    int class_id = 0;
    Domain domain = Domain::source;
    int level = 0;
    std::vector<double> vector;
};

/// Pool every gt box at every level over an upsampled size x size grid.
/// Output is level-major: 3 * |gt| entries.
std::vector<InstanceFeature> pool_instances(const MultiLevelFeatures& record,
                                            int grid_size = kDefaultPoolGrid);

}  // namespace cpalign
