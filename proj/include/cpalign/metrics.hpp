#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpalign/bbox.hpp"

namespace cpalign {

struct Detection {
    std::string image_id;
    int class_id = 0;
    BBox bbox;
    double confidence = 0.0;
};

struct GroundTruthBox {
    std::string image_id;
    int class_id = 0;
    BBox bbox;
};

/// Average precision for one class at one IoU threshold, all-points
/// interpolation. Detections are ranked by descending confidence (stable for
/// ties); each one greedily claims the unmatched ground-truth box in its
/// image with the highest IoU at or above the threshold. No ground truth and
/// no detections scores 0.
double average_precision(const std::vector<Detection>& detections,
                         const std::vector<GroundTruthBox>& ground_truth, double iou_threshold);

struct ClassMetrics {
    int class_id = 0;
    double ap50 = 0.0;
    std::int64_t gt_count = 0;
    std::int64_t det_count = 0;
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;  // classes with any gt or detections, ascending
    double map50 = 0.0;
    double map50_95 = 0.0;  // mean over IoU thresholds 0.50, 0.55, ..., 0.95
    double recall50 = 0.0;  // matched gt / total gt at IoU 0.5
};

/// Class-wise APs plus the aggregate scores. A class with detections but no
/// ground truth counts as AP 0; classes absent from both sides are skipped.
MetricsReport map_suite(const std::vector<Detection>& detections,
                        const std::vector<GroundTruthBox>& ground_truth);

std::string to_json(const MetricsReport& report, int indent = 2);

}  // namespace cpalign
