#include "cpalign/compose.hpp"

#include <json.hpp>

#include "cpalign/error.hpp"
#include "cpalign/rng.hpp"

namespace cpalign {

namespace {

/// Shuffled index deck: draws are without replacement until the deck runs
/// out, then it reshuffles. Guarantees even cycling over the pool.
class Deck {
public:
    explicit Deck(const std::vector<std::string>& ids) : ids_(&ids) {}

    const std::string& draw(Rng& rng) {
        if (order_.empty()) {
            order_.resize(ids_->size());
            for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
            rng.shuffle(order_);
        }
        const std::size_t idx = order_.back();
        order_.pop_back();
        return (*ids_)[idx];
    }

private:
    const std::vector<std::string>* ids_;
    std::vector<std::size_t> order_;
};

}  // namespace

BatchSchedule compose_schedule(const std::vector<std::string>& source_ids,
                               const std::vector<std::string>& augmented_ids,
                               const std::vector<std::string>& target_ids,
                               const ComposeConfig& cfg) {
    if (cfg.batch_size < 2)
        throw ValidationError(
            "compose_schedule: batch_size must be >= 2 (one target plus at least one other)");
    if (cfg.num_batches < 1)
        throw ValidationError("compose_schedule: num_batches must be >= 1");
    if (!(cfg.source_fraction >= 0.0 && cfg.source_fraction <= 1.0))
        throw ValidationError("compose_schedule: source_fraction must lie in [0, 1]");
    if (target_ids.empty()) throw ValidationError("compose_schedule: empty target pool");
    if (source_ids.empty() && cfg.source_fraction > 0.0)
        throw ValidationError("compose_schedule: empty source pool");
    if (augmented_ids.empty() && cfg.source_fraction < 1.0)
        throw ValidationError("compose_schedule: empty augmented pool");

    Rng rng(cfg.seed);
    Deck source_deck(source_ids);
    Deck augmented_deck(augmented_ids);

    BatchSchedule schedule;
    schedule.batch_size = cfg.batch_size;
    schedule.batches.reserve(static_cast<std::size_t>(cfg.num_batches));

    for (int b = 0; b < cfg.num_batches; ++b) {
        std::vector<ScheduleSlot> batch(static_cast<std::size_t>(cfg.batch_size));
        const std::size_t target_slot = rng.index(batch.size());
        for (std::size_t s = 0; s < batch.size(); ++s) {
            if (s == target_slot) {
                batch[s] = {Domain::target, target_ids[rng.index(target_ids.size())]};
            } else if (rng.uniform01() < cfg.source_fraction) {
                batch[s] = {Domain::source, source_deck.draw(rng)};
            } else {
                batch[s] = {Domain::augmented, augmented_deck.draw(rng)};
            }
        }
        schedule.batches.push_back(std::move(batch));
    }
    return schedule;
}

std::string to_jsonl(const BatchSchedule& schedule) {
    std::string out;
    for (std::size_t b = 0; b < schedule.batches.size(); ++b) {
        nlohmann::json j;
        j["batch"] = b;
        j["slots"] = nlohmann::json::array();
        for (const auto& slot : schedule.batches[b]) {
            j["slots"].push_back({{"image_id", slot.image_id}, {"pool", to_string(slot.pool)}});
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace cpalign
