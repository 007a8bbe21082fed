#include "cpalign/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cpalign/error.hpp"
#include "cpalign/rng.hpp"

namespace cpalign {

std::int64_t ClassStats::max_count() const {
    std::int64_t m = 0;
    for (const auto c : per_class_count) m = std::max(m, c);
    return m;
}

ClassStats compute_stats(const DetectionDataset& source, int r) {
    if (r < 1) throw ValidationError("compute_stats: threshold r must be >= 1");
    if (source.images.empty()) throw ValidationError("compute_stats: empty dataset");
    validate_dataset(source);

    ClassStats stats;
    stats.r = r;
    stats.per_class_count.assign(source.classes.size(), 0);
    stats.class_presence.resize(source.classes.size());
    stats.instances.resize(source.classes.size());

    for (const auto& rec : source.images) {
        std::vector<bool> present(source.classes.size(), false);
        for (std::size_t j = 0; j < rec.annotations.size(); ++j) {
            const Annotation& a = rec.annotations[j];
            ++stats.per_class_count[a.class_id];
            stats.instances[a.class_id].push_back(
                {rec.image_id, static_cast<int>(j)});
            if (!present[a.class_id]) {
                present[a.class_id] = true;
                stats.class_presence[a.class_id].push_back(rec.image_id);
            }
        }
        if (rec.annotations.size() < static_cast<std::size_t>(r)) {
            stats.sparse_images.push_back(rec.image_id);
        } else {
            stats.dense_images.push_back(rec.image_id);
        }
    }
    return stats;
}

IncrementPlan compute_increment_plan(const ClassStats& stats, const PlanConfig& cfg,
                                     std::uint64_t seed) {
    if (cfg.balance_factor <= 0.0 || cfg.balance_factor > 1.0)
        throw ValidationError("compute_increment_plan: balance_factor must be in (0, 1]");
    if (cfg.cap_per_image < 1)
        throw ValidationError("compute_increment_plan: cap_per_image must be >= 1");

    const std::int64_t max_count = stats.max_count();
    const std::int64_t target =
        static_cast<std::int64_t>(std::ceil(cfg.balance_factor * static_cast<double>(max_count)));

    IncrementPlan plan;
    Rng rng(seed);
    const std::size_t num_receivers = stats.sparse_images.size();

    for (std::size_t c = 0; c < stats.per_class_count.size(); ++c) {
        const std::int64_t count = stats.per_class_count[c];
        if (count >= target || count >= max_count) continue;
        const std::int64_t requested = target - count;
        if (requested <= 0) continue;

        const auto& donors = stats.instances[c];
        if (donors.empty())
            throw ValidationError("compute_increment_plan: class " + std::to_string(c) +
                                  " needs increments but has no donor instances");
        if (num_receivers == 0)
            throw ValidationError(
                "compute_increment_plan: no sparse images available to receive pastes");

        // Seeded rotation of both cycles; consumed in class order, so the plan
        // is a deterministic function of (stats, cfg, seed).
        const std::size_t recv_offset = rng.index(num_receivers);
        const std::size_t donor_offset = rng.index(donors.size());

        ClassIncrements ci;
        ci.class_id = static_cast<int>(c);
        ci.requested = requested;

        // Deal copies one at a time around the receiver cycle, honoring the
        // per-image cap. Equivalent to base + remainder splitting.
        const std::int64_t cap_total =
            static_cast<std::int64_t>(cfg.cap_per_image) * static_cast<std::int64_t>(num_receivers);
        const std::int64_t placeable = std::min(requested, cap_total);
        std::vector<std::int64_t> copies_per_receiver(num_receivers, 0);
        const std::int64_t base = placeable / static_cast<std::int64_t>(num_receivers);
        std::int64_t rem = placeable % static_cast<std::int64_t>(num_receivers);
        for (std::size_t k = 0; k < num_receivers; ++k) {
            copies_per_receiver[k] = base + (static_cast<std::int64_t>(k) < rem ? 1 : 0);
        }

        std::size_t donor_cursor = donor_offset;
        for (std::size_t k = 0; k < num_receivers; ++k) {
            const std::size_t recv = (recv_offset + k) % num_receivers;
            for (std::int64_t copy = 0; copy < copies_per_receiver[k]; ++copy) {
                const InstanceRef& donor = donors[donor_cursor % donors.size()];
                ++donor_cursor;
                if (!ci.assignments.empty() &&
                    ci.assignments.back().receiving_image_id == stats.sparse_images[recv] &&
                    ci.assignments.back().donor_image_id == donor.image_id &&
                    ci.assignments.back().donor_annotation_index == donor.annotation_index) {
                    ++ci.assignments.back().copies;
                } else {
                    ci.assignments.push_back({stats.sparse_images[recv], donor.image_id,
                                              donor.annotation_index, 1});
                }
                ++ci.total_increments;
            }
        }
        plan.classes.push_back(std::move(ci));
    }
    return plan;
}

}  // namespace cpalign
