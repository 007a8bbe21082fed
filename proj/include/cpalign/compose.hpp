#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpalign/dataset.hpp"

namespace cpalign {

struct ComposeConfig {
    int batch_size = 4;
    int num_batches = 1;
    // Share of the non-target slots drawn from the plain source pool; the
    // rest come from the augmented pool.
    double source_fraction = 30.0 / 98.0;
    std::uint64_t seed = 0;
};

struct ScheduleSlot {
    Domain pool = Domain::source;
    std::string image_id;

    bool operator==(const ScheduleSlot& o) const {
        return pool == o.pool && image_id == o.image_id;
    }
};

struct BatchSchedule {
    int batch_size = 0;
    std::vector<std::vector<ScheduleSlot>> batches;
};

/// Deal `num_batches` batches. Every batch holds exactly one target image
/// (uniform with replacement, at a random slot); the other slots are filled
/// from shuffled per-pool decks that reshuffle only when exhausted, so both
/// pools are cycled evenly. Deterministic for a given (inputs, config).
BatchSchedule compose_schedule(const std::vector<std::string>& source_ids,
                               const std::vector<std::string>& augmented_ids,
                               const std::vector<std::string>& target_ids,
                               const ComposeConfig& cfg);

/// One JSON object per batch, newline separated.
std::string to_jsonl(const BatchSchedule& schedule);

}  // namespace cpalign
