#include "cpalign/balance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "cpalign/error.hpp"
#include "cpalign/threading.hpp"

using nlohmann::json;

namespace cpalign {

std::string to_json(const BalanceReport& report, int indent) {
    json j;
    j["sparse_count"] = report.sparse_count;
    j["dense_count"] = report.dense_count;
    j["paste_failures"] = report.paste_failures;
    j["injection_failures"] = report.injection_failures;
    j["injected_cells"] = report.injected_cells;
    j["paste_scale_policy"] = report.paste_scale_policy;
    j["config"] = {
        {"r", report.config.r},
        {"balance_factor", report.config.balance_factor},
        {"cap_per_image", report.config.cap_per_image},
        {"stride", report.config.stride},
        {"intensity_scale", {report.config.augment.intensity_scale_lo,
                             report.config.augment.intensity_scale_hi}},
        {"blur_sigma", {report.config.augment.blur_sigma_lo, report.config.augment.blur_sigma_hi}},
        {"augment_injected_cell", report.config.augment_injected_cell},
        {"max_inject_tries", report.config.max_inject_tries},
        {"min_increment_fraction", report.config.min_increment_fraction},
        {"seed", report.config.seed},
        {"threads", report.config.threads},
    };
    j["per_class"] = json::array();
    for (const auto& row : report.per_class) {
        j["per_class"].push_back({{"class_id", row.class_id},
                                  {"class_name", row.class_name},
                                  {"before", row.before},
                                  {"requested", row.requested},
                                  {"planned", row.planned},
                                  {"achieved", row.achieved},
                                  {"after", row.after}});
    }
    return j.dump(indent);
}

namespace {

struct PlannedPaste {
    int class_id;
    const ImageRecord* donor;
    int annotation_index;
};

struct PerImageOutcome {
    ImageRecord record;
    std::vector<std::int64_t> achieved_per_class;
    std::int64_t paste_failures = 0;
    bool injected = false;
};

}  // namespace

BalanceResult balance_dataset(const DetectionDataset& source, const DetectionDataset& target,
                              const BalanceConfig& cfg) {
    validate_dataset(source);
    validate_dataset(target);
    cfg.augment.validate();
    if (source.classes != target.classes)
        throw ValidationError("balance_dataset: source and target class catalogs differ");

    const ClassStats stats = compute_stats(source, cfg.r);
    const IncrementPlan plan =
        compute_increment_plan(stats, {cfg.balance_factor, cfg.cap_per_image}, cfg.seed);

    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : source.images) by_id.emplace(rec.image_id, &rec);

    // Per-receiver work lists, in plan order (class ascending, then cycle order).
    std::unordered_map<std::string, std::vector<PlannedPaste>> work;
    for (const auto& ci : plan.classes) {
        for (const auto& asg : ci.assignments) {
            const ImageRecord* donor = by_id.at(asg.donor_image_id);
            for (int copy = 0; copy < asg.copies; ++copy) {
                work[asg.receiving_image_id].push_back(
                    {ci.class_id, donor, asg.donor_annotation_index});
            }
        }
    }

    const int num_classes = source.num_classes();
    std::vector<PerImageOutcome> outcomes(stats.sparse_images.size());

    parallel_for(stats.sparse_images.size(), cfg.threads, [&](std::size_t i) {
        const std::string& image_id = stats.sparse_images[i];
        ImageRecord host = *by_id.at(image_id);
        Rng rng = Rng::for_stream(cfg.seed, image_id);
        BinaryMask mask = build_object_mask(host);

        PerImageOutcome out;
        out.achieved_per_class.assign(num_classes, 0);

        auto it = work.find(image_id);
        if (it != work.end()) {
            for (const PlannedPaste& pp : it->second) {
                const Annotation& donor_ann = pp.donor->annotations[pp.annotation_index];
                const PixelRect rect =
                    pixel_footprint(donor_ann.bbox, pp.donor->width, pp.donor->height);
                Image patch = crop(pp.donor->pixels, rect);
                patch = augment_patch(patch, cfg.augment, rng);
                if (patch.width > mask.width || patch.height > mask.height) {
                    ++out.paste_failures;
                    continue;
                }
                const auto slot =
                    find_empty_region(mask, patch.width, patch.height, cfg.stride, rng);
                if (!slot) {
                    ++out.paste_failures;
                    continue;
                }
                host = paste_object(host, patch, *slot, pp.class_id);
                mask.set_rect(pixel_footprint(*slot, mask.width, mask.height));
                ++out.achieved_per_class[pp.class_id];
            }
        }

        // Domain-generalization step: one target cell per sparse image,
        // sharing the occupancy mask accumulated above.
        try {
            InjectOptions opts;
            opts.max_tries = cfg.max_inject_tries;
            opts.augment_cell = cfg.augment_injected_cell;
            opts.stride = cfg.stride;
            host = inject_target_cell(host, target, cfg.augment, rng, mask, opts);
            out.injected = true;
        } catch (const PlacementError&) {
            out.injected = false;
        }

        host.domain = Domain::augmented;
        out.record = std::move(host);
        outcomes[i] = std::move(out);
    });

    // Assemble: untouched dense images plus augmented sparse images, by id.
    BalanceResult result;
    result.dataset.classes = source.classes;
    result.dataset.domain = Domain::augmented;
    for (const auto& id : stats.dense_images) result.dataset.images.push_back(*by_id.at(id));
    for (auto& out : outcomes) result.dataset.images.push_back(std::move(out.record));
    std::sort(result.dataset.images.begin(), result.dataset.images.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });

    BalanceReport& report = result.report;
    report.config = cfg;
    report.sparse_count = static_cast<std::int64_t>(stats.sparse_images.size());
    report.dense_count = static_cast<std::int64_t>(stats.dense_images.size());

    std::vector<std::int64_t> achieved(num_classes, 0);
    for (const auto& out : outcomes) {
        report.paste_failures += out.paste_failures;
        if (out.injected) {
            ++report.injected_cells;
        } else {
            ++report.injection_failures;
        }
        for (int c = 0; c < num_classes; ++c) achieved[c] += out.achieved_per_class[c];
    }

    std::vector<std::int64_t> after(num_classes, 0);
    for (const auto& rec : result.dataset.images) {
        for (const auto& a : rec.annotations) ++after[a.class_id];
    }

    std::map<int, const ClassIncrements*> planned;
    for (const auto& ci : plan.classes) planned.emplace(ci.class_id, &ci);
    for (int c = 0; c < num_classes; ++c) {
        ClassBalanceRow row;
        row.class_id = c;
        row.class_name = source.classes[c];
        row.before = stats.per_class_count[c];
        if (auto it = planned.find(c); it != planned.end()) {
            row.requested = it->second->requested;
            row.planned = it->second->total_increments;
        }
        row.achieved = achieved[c];
        row.after = after[c];
        report.per_class.push_back(row);
    }

    for (const auto& row : report.per_class) {
        if (row.planned > 0 &&
            static_cast<double>(row.achieved) <
                cfg.min_increment_fraction * static_cast<double>(row.planned)) {
            throw Error("balance_dataset: class '" + row.class_name + "' received " +
                        std::to_string(row.achieved) + " of " + std::to_string(row.planned) +
                        " planned increments (report: " + to_json(report, -1) + ")");
        }
    }
    return result;
}

}  // namespace cpalign
