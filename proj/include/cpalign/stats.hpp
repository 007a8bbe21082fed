#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpalign/dataset.hpp"

namespace cpalign {

/// One existing object instance, addressed by its image and annotation slot.
struct InstanceRef {
    std::string image_id;
    int annotation_index = 0;

    bool operator==(const InstanceRef&) const = default;
};

/// Source-dataset statistics that drive the paste plan.
struct ClassStats {
    int r = 0;                                      // sparse/dense object-count threshold
    std::vector<std::int64_t> per_class_count;      // indexed by class id
    std::vector<std::string> sparse_images;         // fewer than r objects
    std::vector<std::string> dense_images;          // r or more objects
    std::vector<std::vector<std::string>> class_presence;  // class id -> image ids holding it
    std::vector<std::vector<InstanceRef>> instances;       // class id -> donor instances

    std::int64_t max_count() const;
};

/// Count objects per class and partition images by the object-count
/// threshold r. Fails on an empty dataset.
ClassStats compute_stats(const DetectionDataset& source, int r);

/// `copies` pastes of one donor instance into one receiving image.
struct PasteAssignment {
    std::string receiving_image_id;
    std::string donor_image_id;
    int donor_annotation_index = 0;
    int copies = 1;
};

struct ClassIncrements {
    int class_id = 0;
    std::int64_t requested = 0;         // ceil(balance_factor * max_count) - count
    std::int64_t total_increments = 0;  // == sum of assignment copies (may be capped below requested)
    std::vector<PasteAssignment> assignments;
};

/// Paste schedule for every deficit class. Classes already at or above the
/// balance target are absent.
struct IncrementPlan {
    std::vector<ClassIncrements> classes;  // ascending class_id

    bool empty() const { return classes.empty(); }
};

struct PlanConfig {
    double balance_factor = 0.9;  // target fraction of the max class count
    int cap_per_image = 4;        // max copies of one class pasted into one image
};

/// Build the paste schedule: donors cycle round-robin over a class's existing
/// instances, receiving images cycle round-robin over the sparse set, with a
/// per-image per-class cap. The seed rotates both cycles' starting points.
IncrementPlan compute_increment_plan(const ClassStats& stats, const PlanConfig& cfg,
                                     std::uint64_t seed);

}  // namespace cpalign
