#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cpalign/compose.hpp"
#include "cpalign/error.hpp"

using namespace cpalign;

namespace {

std::vector<std::string> make_ids(const std::string& prefix, int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

}  // namespace

TEST_CASE("every batch holds exactly one target image") {
    const auto src = make_ids("s", 25);
    const auto aug = make_ids("a", 40);
    const auto tgt = make_ids("t", 5);
    ComposeConfig cfg;
    cfg.num_batches = 300;
    cfg.seed = 7;
    const BatchSchedule sched = compose_schedule(src, aug, tgt, cfg);

    REQUIRE(sched.batches.size() == 300);
    const std::set<std::string> tgt_set(tgt.begin(), tgt.end());
    for (const auto& batch : sched.batches) {
        REQUIRE(batch.size() == 4);
        int targets = 0;
        for (const auto& slot : batch) {
            if (slot.pool == Domain::target) {
                ++targets;
                CHECK(tgt_set.count(slot.image_id) == 1);
            }
        }
        CHECK(targets == 1);
    }
}

TEST_CASE("default source share is 30/98 and holds empirically") {
    ComposeConfig cfg;
    CHECK(cfg.source_fraction == 30.0 / 98.0);
    CHECK(cfg.batch_size == 4);

    const auto src = make_ids("s", 30);
    const auto aug = make_ids("a", 68);
    const auto tgt = make_ids("t", 6);
    cfg.num_batches = 4000;  // 12000 non-target slots
    cfg.seed = 11;
    const BatchSchedule sched = compose_schedule(src, aug, tgt, cfg);

    std::int64_t source_slots = 0, other_slots = 0;
    for (const auto& batch : sched.batches) {
        for (const auto& slot : batch) {
            if (slot.pool == Domain::target) continue;
            ++other_slots;
            if (slot.pool == Domain::source) ++source_slots;
        }
    }
    CHECK(other_slots == 12000);
    const double share = static_cast<double>(source_slots) / static_cast<double>(other_slots);
    CHECK(share == doctest::Approx(30.0 / 98.0).epsilon(0.065));  // +-0.02 absolute
}

TEST_CASE("slot ids come from the pool they are labeled with") {
    const auto src = make_ids("s", 10);
    const auto aug = make_ids("a", 12);
    const auto tgt = make_ids("t", 3);
    ComposeConfig cfg;
    cfg.num_batches = 100;
    cfg.seed = 3;
    const std::set<std::string> s(src.begin(), src.end());
    const std::set<std::string> a(aug.begin(), aug.end());
    for (const auto& batch : compose_schedule(src, aug, tgt, cfg).batches) {
        for (const auto& slot : batch) {
            if (slot.pool == Domain::source) CHECK(s.count(slot.image_id) == 1);
            if (slot.pool == Domain::augmented) CHECK(a.count(slot.image_id) == 1);
        }
    }
}

TEST_CASE("deck draws cover the augmented pool without early repeats") {
    const auto src = make_ids("s", 10);
    const auto aug = make_ids("a", 24);
    const auto tgt = make_ids("t", 4);
    ComposeConfig cfg;
    cfg.num_batches = 200;  // roughly 410 augmented draws, 17 deck cycles
    cfg.seed = 5;
    const BatchSchedule sched = compose_schedule(src, aug, tgt, cfg);

    std::vector<std::string> aug_draws;
    for (const auto& batch : sched.batches)
        for (const auto& slot : batch)
            if (slot.pool == Domain::augmented) aug_draws.push_back(slot.image_id);
    REQUIRE(aug_draws.size() > 100);

    // full coverage
    const std::set<std::string> seen(aug_draws.begin(), aug_draws.end());
    CHECK(seen.size() == aug.size());

    // without replacement inside a cycle: any window of 24 consecutive draws
    // spans at most two deck cycles, so no id may appear three times in it
    for (std::size_t start = 0; start + aug.size() <= aug_draws.size(); ++start) {
        std::map<std::string, int> window;
        for (std::size_t i = start; i < start + aug.size(); ++i) ++window[aug_draws[i]];
        for (const auto& [id, count] : window) {
            if (count > 2) FAIL("id ", id, " drawn ", count, " times inside one deck window");
        }
    }

    // even cycling: draw counts differ by at most one cycle
    std::map<std::string, int> totals;
    for (const auto& id : aug_draws) ++totals[id];
    int lo = 1 << 30, hi = 0;
    for (const auto& [id, count] : totals) {
        lo = std::min(lo, count);
        hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
}

TEST_CASE("schedules are deterministic in the seed") {
    const auto src = make_ids("s", 9);
    const auto aug = make_ids("a", 15);
    const auto tgt = make_ids("t", 2);
    ComposeConfig cfg;
    cfg.num_batches = 50;
    cfg.seed = 42;
    const BatchSchedule x = compose_schedule(src, aug, tgt, cfg);
    const BatchSchedule y = compose_schedule(src, aug, tgt, cfg);
    REQUIRE(x.batches.size() == y.batches.size());
    for (std::size_t b = 0; b < x.batches.size(); ++b) {
        for (std::size_t s = 0; s < x.batches[b].size(); ++s)
            CHECK(x.batches[b][s] == y.batches[b][s]);
    }

    cfg.seed = 43;
    const BatchSchedule z = compose_schedule(src, aug, tgt, cfg);
    bool same = true;
    for (std::size_t b = 0; b < x.batches.size(); ++b)
        for (std::size_t s = 0; s < x.batches[b].size(); ++s)
            same &= x.batches[b][s] == z.batches[b][s];
    CHECK_FALSE(same);
}

TEST_CASE("degenerate configurations are rejected") {
    const auto src = make_ids("s", 3);
    const auto aug = make_ids("a", 3);
    const auto tgt = make_ids("t", 1);
    ComposeConfig cfg;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(compose_schedule(src, aug, tgt, cfg), ValidationError);
    cfg.batch_size = 4;
    cfg.num_batches = 0;
    CHECK_THROWS_AS(compose_schedule(src, aug, tgt, cfg), ValidationError);
    cfg.num_batches = 1;
    cfg.source_fraction = 1.4;
    CHECK_THROWS_AS(compose_schedule(src, aug, tgt, cfg), ValidationError);
    cfg.source_fraction = 0.5;
    CHECK_THROWS_AS(compose_schedule(src, aug, {}, cfg), ValidationError);
    CHECK_THROWS_AS(compose_schedule({}, aug, tgt, cfg), ValidationError);
    CHECK_THROWS_AS(compose_schedule(src, {}, tgt, cfg), ValidationError);
}

TEST_CASE("empty side pools are fine when the fraction never draws them") {
    const auto aug = make_ids("a", 5);
    const auto tgt = make_ids("t", 2);
    ComposeConfig cfg;
    cfg.num_batches = 20;
    cfg.source_fraction = 0.0;
    const BatchSchedule sched = compose_schedule({}, aug, tgt, cfg);
    for (const auto& batch : sched.batches)
        for (const auto& slot : batch) CHECK(slot.pool != Domain::source);
}

TEST_CASE("jsonl emission round trips through a JSON parser") {
    const auto src = make_ids("s", 4);
    const auto aug = make_ids("a", 6);
    const auto tgt = make_ids("t", 2);
    ComposeConfig cfg;
    cfg.num_batches = 5;
    cfg.seed = 9;
    const BatchSchedule sched = compose_schedule(src, aug, tgt, cfg);
    const std::string jsonl = to_jsonl(sched);

    std::istringstream in(jsonl);
    std::string line;
    int batches = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("batch") == batches);
        REQUIRE(j.at("slots").size() == 4);
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(j.at("slots")[s].at("image_id") ==
                  sched.batches[static_cast<std::size_t>(batches)][s].image_id);
            CHECK(j.at("slots")[s].at("pool") ==
                  to_string(sched.batches[static_cast<std::size_t>(batches)][s].pool));
        }
        ++batches;
    }
    CHECK(batches == 5);
}
