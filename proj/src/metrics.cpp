#include "cpalign/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "cpalign/error.hpp"

namespace cpalign {

namespace {

void validate_box(const BBox& b, const char* what) {
    if (!b.valid()) throw ValidationError(std::string(what) + ": invalid box");
}

/// Indices of `detections` ordered by descending confidence; stable for ties.
std::vector<std::size_t> ranked(const std::vector<Detection>& detections) {
    std::vector<std::size_t> order(detections.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].confidence > detections[b].confidence;
    });
    return order;
}

/// Greedy one-to-one matching in rank order. Returns, per ranked detection,
/// whether it claimed a ground-truth box. `matched_out` reports how many gt
/// boxes were claimed.
std::vector<bool> greedy_match(const std::vector<Detection>& detections,
                               const std::vector<std::size_t>& order,
                               const std::vector<GroundTruthBox>& ground_truth,
                               double iou_threshold, std::int64_t* matched_out = nullptr) {
    std::map<std::string, std::vector<std::size_t>> gt_by_image;
    for (std::size_t i = 0; i < ground_truth.size(); ++i)
        gt_by_image[ground_truth[i].image_id].push_back(i);

    std::vector<bool> gt_taken(ground_truth.size(), false);
    std::vector<bool> is_tp(order.size(), false);
    std::int64_t matched = 0;

    for (std::size_t r = 0; r < order.size(); ++r) {
        const Detection& det = detections[order[r]];
        const auto it = gt_by_image.find(det.image_id);
        if (it == gt_by_image.end()) continue;
        double best_iou = 0.0;
        std::size_t best = ground_truth.size();
        for (const std::size_t g : it->second) {
            if (gt_taken[g]) continue;
            const double v = iou(det.bbox, ground_truth[g].bbox);
            if (v >= iou_threshold && v > best_iou) {
                best_iou = v;
                best = g;
            }
        }
        if (best < ground_truth.size()) {
            gt_taken[best] = true;
            is_tp[r] = true;
            ++matched;
        }
    }
    if (matched_out) *matched_out = matched;
    return is_tp;
}

double envelope_ap(const std::vector<bool>& is_tp, std::int64_t total_gt) {
    if (total_gt == 0 || is_tp.empty()) return 0.0;
    const std::size_t n = is_tp.size();
    std::vector<double> precision(n), recall(n);
    std::int64_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_tp[i]) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
    }
    // running max from the right turns the raw curve into its envelope
    for (std::size_t i = n - 1; i-- > 0;)
        precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = recall[0] * precision[0];
    for (std::size_t i = 1; i < n; ++i) ap += (recall[i] - recall[i - 1]) * precision[i];
    return ap;
}

}  // namespace

double average_precision(const std::vector<Detection>& detections,
                         const std::vector<GroundTruthBox>& ground_truth,
                         double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw ValidationError("average_precision: iou_threshold must lie in (0, 1]");
    for (const auto& d : detections) validate_box(d.bbox, "detection");
    for (const auto& g : ground_truth) validate_box(g.bbox, "ground truth");

    const auto order = ranked(detections);
    const auto is_tp = greedy_match(detections, order, ground_truth, iou_threshold);
    return envelope_ap(is_tp, static_cast<std::int64_t>(ground_truth.size()));
}

MetricsReport map_suite(const std::vector<Detection>& detections,
                        const std::vector<GroundTruthBox>& ground_truth) {
    std::set<int> classes;
    for (const auto& d : detections) classes.insert(d.class_id);
    for (const auto& g : ground_truth) classes.insert(g.class_id);

    std::map<int, std::vector<Detection>> dets_by_class;
    std::map<int, std::vector<GroundTruthBox>> gt_by_class;
    for (const auto& d : detections) dets_by_class[d.class_id].push_back(d);
    for (const auto& g : ground_truth) gt_by_class[g.class_id].push_back(g);

    MetricsReport report;
    std::int64_t matched_total = 0;

    for (const int cls : classes) {
        const auto& dets = dets_by_class[cls];
        const auto& gts = gt_by_class[cls];

        ClassMetrics cm;
        cm.class_id = cls;
        cm.gt_count = static_cast<std::int64_t>(gts.size());
        cm.det_count = static_cast<std::int64_t>(dets.size());
        cm.ap50 = average_precision(dets, gts, 0.5);
        report.per_class.push_back(cm);
        report.map50 += cm.ap50;

        std::int64_t matched = 0;
        greedy_match(dets, ranked(dets), gts, 0.5, &matched);
        matched_total += matched;

        for (int t = 0; t < 10; ++t) {
            const double thresh = 0.5 + 0.05 * t;
            report.map50_95 += average_precision(dets, gts, thresh);
        }
    }

    const double num_classes = static_cast<double>(report.per_class.size());
    if (num_classes > 0) {
        report.map50 /= num_classes;
        report.map50_95 /= num_classes * 10.0;
    }
    if (!ground_truth.empty())
        report.recall50 =
            static_cast<double>(matched_total) / static_cast<double>(ground_truth.size());
    return report;
}

std::string to_json(const MetricsReport& report, int indent) {
    nlohmann::json j;
    j["map50"] = report.map50;
    j["map50_95"] = report.map50_95;
    j["recall50"] = report.recall50;
    j["per_class"] = nlohmann::json::array();
    for (const auto& cm : report.per_class) {
        j["per_class"].push_back({{"class_id", cm.class_id},
                                  {"ap50", cm.ap50},
                                  {"gt_count", cm.gt_count},
                                  {"det_count", cm.det_count}});
    }
    return j.dump(indent);
}

}  // namespace cpalign
