#include <doctest.h>

#include <optional>
#include <set>

#include "cpalign/error.hpp"
#include "cpalign/mask.hpp"
#include "cpalign/rng.hpp"
#include "helpers.hpp"

using namespace cpalign;
using cpalign::testing::ann;
using cpalign::testing::make_record;

TEST_CASE("mask with no annotations is all zero") {
    const ImageRecord rec = make_record("m0", 40, 30, {});
    const BinaryMask mask = build_object_mask(rec);
    CHECK(mask.width == 40);
    CHECK(mask.height == 30);
    CHECK(mask.set_count() == 0);
}

TEST_CASE("single box sets exactly its pixel footprint") {
    const ImageRecord rec = make_record("m1", 100, 100, {ann(0, 10, 10, 20, 20)});
    const BinaryMask mask = build_object_mask(rec);
    CHECK(mask.set_count() == 100);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) {
            const bool inside = x >= 10 && x < 20 && y >= 10 && y < 20;
            if (mask.test(x, y) != inside) {
                FAIL("mask mismatch at (", x, ",", y, ")");
            }
        }
    }
}

TEST_CASE("overlapping boxes cover the union, per-pixel cross-check") {
    const ImageRecord rec = make_record(
        "m2", 64, 64, {ann(0, 5, 5, 25, 25), ann(1, 15, 15, 40, 30)});
    const BinaryMask mask = build_object_mask(rec);

    // brute-force union over individual footprints
    std::set<std::pair<int, int>> expect;
    for (const auto& a : rec.annotations) {
        const PixelRect r = pixel_footprint(a.bbox, rec.width, rec.height);
        for (int y = r.y0; y < r.y1; ++y)
            for (int x = r.x0; x < r.x1; ++x) expect.insert({x, y});
    }
    CHECK(mask.set_count() == static_cast<std::int64_t>(expect.size()));
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (mask.test(x, y) != (expect.count({x, y}) == 1)) {
                FAIL("union mismatch at (", x, ",", y, ")");
            }
}

TEST_CASE("fractional box edges round outward") {
    const ImageRecord rec = make_record("m3", 20, 20, {ann(0, 3.2, 3.9, 6.1, 5.01)});
    const BinaryMask mask = build_object_mask(rec);
    // floor(3.2)=3, ceil(6.1)=7, floor(3.9)=3, ceil(5.01)=6
    CHECK(mask.set_count() == 4 * 3);
    CHECK(mask.test(3, 3));
    CHECK(mask.test(6, 5));
    CHECK_FALSE(mask.test(7, 3));
    CHECK_FALSE(mask.test(3, 6));
}

TEST_CASE("empty mask accepts any in-bounds patch") {
    BinaryMask mask(64, 48);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto spot = find_empty_region(mask, 16, 12, kDefaultSearchStride, rng);
        REQUIRE(spot.has_value());
        CHECK(spot->x_min >= 0);
        CHECK(spot->y_min >= 0);
        CHECK(spot->x_max <= 64);
        CHECK(spot->y_max <= 48);
        CHECK(spot->width() == 16);
        CHECK(spot->height() == 12);
    }
}

TEST_CASE("fully occupied mask yields no placement") {
    BinaryMask mask(32, 32);
    mask.set_rect({0, 0, 32, 32});
    Rng rng(4);
    const auto spot = find_empty_region(mask, 4, 4, kDefaultSearchStride, rng);
    CHECK_FALSE(spot.has_value());
}

TEST_CASE("free corner is found and placement has zero overlap") {
    // everything occupied except a 30x30 corner at the bottom right
    BinaryMask mask(100, 100);
    mask.set_rect({0, 0, 100, 70});
    mask.set_rect({0, 70, 70, 100});
    Rng rng(9);
    const auto spot = find_empty_region(mask, 20, 20, kDefaultSearchStride, rng);
    REQUIRE(spot.has_value());
    CHECK(spot->x_min >= 70);
    CHECK(spot->y_min >= 70);
    CHECK(spot->x_max <= 100);
    CHECK(spot->y_max <= 100);

    // per-pixel overlap check against the occupancy mask
    const PixelRect r = pixel_footprint(*spot, 100, 100);
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
            if (mask.test(x, y)) FAIL("placement overlaps occupancy at (", x, ",", y, ")");
}

TEST_CASE("candidate choice is uniform over the free grid cells") {
    // two free cells at known grid positions; everything else occupied
    BinaryMask mask(64, 8);
    mask.set_rect({0, 0, 64, 8});
    // clear cells at x=0 and x=48 (both on the stride-8 grid)
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            mask.bits[static_cast<std::size_t>(y) * 64 + x] = 0;
            mask.bits[static_cast<std::size_t>(y) * 64 + 48 + x] = 0;
        }
    Rng rng(11);
    int left = 0, right = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const auto spot = find_empty_region(mask, 8, 8, 8, rng);
        REQUIRE(spot.has_value());
        if (spot->x_min == 0) ++left;
        else if (spot->x_min == 48) ++right;
        else FAIL("unexpected placement x=", spot->x_min);
    }
    CHECK(left + right == 2000);
    CHECK(left > 800);
    CHECK(right > 800);
}

TEST_CASE("patch larger than the image is an error") {
    BinaryMask mask(16, 16);
    Rng rng(1);
    CHECK_THROWS_AS(find_empty_region(mask, 17, 4, 8, rng), ValidationError);
    CHECK_THROWS_AS(find_empty_region(mask, 4, 17, 8, rng), ValidationError);
    CHECK_THROWS_AS(find_empty_region(mask, 0, 4, 8, rng), ValidationError);
}

TEST_CASE("seeded overload is deterministic") {
    BinaryMask mask(128, 96);
    mask.set_rect({10, 10, 60, 60});
    const auto a = find_empty_region(mask, 24, 24, std::uint64_t{77});
    const auto b = find_empty_region(mask, 24, 24, std::uint64_t{77});
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->x_min == b->x_min);
    CHECK(a->y_min == b->y_min);
}

TEST_CASE("tail positions beyond the stride grid are reachable") {
    // free space exists only flush against the right edge, off the stride grid
    BinaryMask mask(30, 8);
    mask.set_rect({0, 0, 23, 8});
    Rng rng(2);
    const auto spot = find_empty_region(mask, 7, 8, 8, rng);
    REQUIRE(spot.has_value());
    CHECK(spot->x_min == 23);
}
