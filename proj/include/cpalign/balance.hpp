#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpalign/augment.hpp"
#include "cpalign/dataset.hpp"
#include "cpalign/stats.hpp"

namespace cpalign {

struct BalanceConfig {
    int r = 6;                      // sparse/dense object-count threshold
    double balance_factor = 0.9;    // target fraction of the max class count
    int cap_per_image = 4;          // per-image per-class paste cap
    int stride = kDefaultSearchStride;
    AugmentParams augment;          // jitter/blur ranges (seed field unused here)
    bool augment_injected_cell = true;
    int max_inject_tries = 32;
    double min_increment_fraction = 0.5;  // below this achieved/planned ratio, fail
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ClassBalanceRow {
    int class_id = 0;
    std::string class_name;
    std::int64_t before = 0;     // original object count
    std::int64_t requested = 0;  // increments needed to reach the balance target
    std::int64_t planned = 0;    // increments scheduled (after per-image caps)
    std::int64_t achieved = 0;   // increments actually pasted
    std::int64_t after = 0;      // recounted objects in the output (includes injected cells)
};

struct BalanceReport {
    std::vector<ClassBalanceRow> per_class;
    std::int64_t sparse_count = 0;
    std::int64_t dense_count = 0;
    std::int64_t paste_failures = 0;      // planned pastes with no free slot
    std::int64_t injection_failures = 0;  // sparse images left without a target cell
    std::int64_t injected_cells = 0;
    BalanceConfig config;
    // Donor patches are pasted at their original size; no rescaling is applied.
    std::string paste_scale_policy = "original-size";
};

std::string to_json(const BalanceReport& report, int indent = 2);

struct BalanceResult {
    DetectionDataset dataset;
    BalanceReport report;
};

/// Run the full pipeline: stats -> increment plan -> per-image pasting plus
/// one injected target cell per sparse image. Dense images pass through
/// untouched; output images are sorted by id and |output| == |source|.
/// Deterministic for a given (inputs, config, seed) at any thread count.
BalanceResult balance_dataset(const DetectionDataset& source, const DetectionDataset& target,
                              const BalanceConfig& cfg);

}  // namespace cpalign
