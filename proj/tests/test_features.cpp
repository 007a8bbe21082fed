#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "cpalign/error.hpp"
#include "cpalign/features.hpp"
#include "cpalign/rng.hpp"
#include "helpers.hpp"

using namespace cpalign;
using cpalign::testing::fresh_dir;

namespace {

FeatureMap random_map(int c, int h, int w, std::uint64_t seed) {
    FeatureMap fm(c, h, w);
    Rng rng(seed);
    for (auto& v : fm.data) v = static_cast<float>(rng.uniform(-4.0, 4.0));
    return fm;
}

MultiLevelFeatures sample_record(const std::string& id, std::uint64_t seed) {
    MultiLevelFeatures rec;
    rec.image_id = id;
    rec.image_w = 128;
    rec.image_h = 96;
    rec.levels.push_back(random_map(8, 16, 16, seed));
    rec.levels.push_back(random_map(8, 8, 8, seed + 1));
    rec.levels.push_back(random_map(4, 4, 4, seed + 2));
    rec.gt.push_back({2, BBox{10, 10, 50, 40}, Domain::source});
    rec.gt.push_back({0, BBox{64, 48, 128, 96}, Domain::target});
    return rec;
}

}  // namespace

TEST_CASE("corner-aligned upsample interpolates a 2x2 map exactly") {
    FeatureMap fm(1, 2, 2);
    fm.at(0, 0, 0) = 1.0f;
    fm.at(0, 0, 1) = 2.0f;
    fm.at(0, 1, 0) = 3.0f;
    fm.at(0, 1, 1) = 4.0f;
    const FeatureMap up = upsample_level(fm, 3);
    CHECK(up.at(0, 0, 0) == 1.0f);
    CHECK(up.at(0, 0, 2) == 2.0f);
    CHECK(up.at(0, 2, 0) == 3.0f);
    CHECK(up.at(0, 2, 2) == 4.0f);
    CHECK(up.at(0, 1, 1) == doctest::Approx(2.5));
    CHECK(up.at(0, 0, 1) == doctest::Approx(1.5));
    CHECK(up.at(0, 1, 0) == doctest::Approx(2.0));
}

TEST_CASE("upsample to the input size is the identity") {
    const FeatureMap fm = random_map(3, 7, 7, 11);
    const FeatureMap up = upsample_level(fm, 7);
    CHECK(up.data == fm.data);
}

TEST_CASE("constant maps stay exactly constant at any size") {
    FeatureMap fm(2, 3, 5);
    for (auto& v : fm.data) v = 0.37f;
    for (const int s : {2, 4, 9, 64}) {
        const FeatureMap up = upsample_level(fm, s);
        for (const float v : up.data) CHECK(v == 0.37f);
    }
}

TEST_CASE("upsampled values stay inside the input range") {
    const FeatureMap fm = random_map(2, 5, 9, 21);
    float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
    for (const float v : fm.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const FeatureMap up = upsample_level(fm, 33);
    for (const float v : up.data) {
        CHECK(v >= lo - 1e-6f);
        CHECK(v <= hi + 1e-6f);
    }
}

TEST_CASE("single-row and single-column maps broadcast") {
    FeatureMap fm(1, 1, 2);
    fm.at(0, 0, 0) = 1.0f;
    fm.at(0, 0, 1) = 3.0f;
    const FeatureMap up = upsample_level(fm, 3);
    // every row identical, columns interpolate
    for (int i = 0; i < 3; ++i) {
        CHECK(up.at(0, i, 0) == 1.0f);
        CHECK(up.at(0, i, 1) == doctest::Approx(2.0));
        CHECK(up.at(0, i, 2) == 3.0f);
    }
}

TEST_CASE("pooling a half-plane box recovers the half value") {
    MultiLevelFeatures rec;
    rec.image_id = "halves";
    rec.image_w = 64;
    rec.image_h = 64;
    for (int lvl = 0; lvl < 3; ++lvl) {
        FeatureMap fm(2, 4, 4);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x) fm.at(c, y, x) = (x < 2) ? 5.0f : 9.0f;
        rec.levels.push_back(std::move(fm));
    }
    // left half of the image: grid cells x in [0, S/2)
    rec.gt.push_back({1, BBox{0, 0, 24, 64}, Domain::source});
    const auto feats = pool_instances(rec, 8);
    REQUIRE(feats.size() == 3);
    for (const auto& f : feats) {
        REQUIRE(f.vector.size() == 2);
        // cells 0..2 on an 8-grid all interpolate inside the left plateau
        CHECK(f.vector[0] == doctest::Approx(5.0));
        CHECK(f.vector[1] == doctest::Approx(5.0));
    }

    // full-image box averages everything: mean of per-cell values
    rec.gt[0].bbox = BBox{0, 0, 64, 64};
    const auto full = pool_instances(rec, 8);
    double expect = 0.0;
    const FeatureMap grid = upsample_level(rec.levels[0], 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) expect += grid.at(0, y, x);
    expect /= 64.0;
    CHECK(full[0].vector[0] == doctest::Approx(expect));
}

TEST_CASE("pooling output is level-major with 3 * |gt| entries") {
    const MultiLevelFeatures rec = sample_record("img", 3);
    const auto feats = pool_instances(rec, 16);
    REQUIRE(feats.size() == 6);
    for (int lvl = 0; lvl < 3; ++lvl) {
        for (int i = 0; i < 2; ++i) {
            const auto& f = feats[static_cast<std::size_t>(lvl) * 2 + i];
            CHECK(f.level == lvl);
            CHECK(f.instance_index == i);
            CHECK(f.class_id == rec.gt[i].class_id);
            CHECK(f.domain == rec.gt[i].domain);
            CHECK(f.image_id == "img");
            CHECK(f.vector.size() == static_cast<std::size_t>(rec.levels[lvl].channels));
        }
    }
}

TEST_CASE("pooling is linear in the activations") {
    MultiLevelFeatures rec = sample_record("lin", 5);
    const auto base = pool_instances(rec, 16);
    for (auto& fm : rec.levels)
        for (auto& v : fm.data) v *= 3.0f;
    const auto scaled = pool_instances(rec, 16);
    REQUIRE(base.size() == scaled.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (std::size_t c = 0; c < base[i].vector.size(); ++c) {
            CHECK(scaled[i].vector[c] == doctest::Approx(base[i].vector[c] * 3.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("tiny boxes still pool at least one cell") {
    MultiLevelFeatures rec = sample_record("tiny", 7);
    rec.gt.clear();
    rec.gt.push_back({0, BBox{63.2, 47.1, 63.9, 47.8}, Domain::source});
    const auto feats = pool_instances(rec, 8);
    REQUIRE(feats.size() == 3);
    for (const auto& f : feats)
        for (const double v : f.vector) CHECK(std::isfinite(v));
}

TEST_CASE("feature dump round trips bit-exactly") {
    const auto dir = fresh_dir("feat_rt");
    std::vector<MultiLevelFeatures> records = {sample_record("a", 1), sample_record("b", 2)};
    records[1].gt.clear();  // empty gt list is legal
    const auto path = dir / "dump.fsd";
    write_feature_dump(path, records);
    const auto back = read_feature_dump(path);

    REQUIRE(back.size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(back[r].image_id == records[r].image_id);
        CHECK(back[r].image_w == records[r].image_w);
        CHECK(back[r].image_h == records[r].image_h);
        REQUIRE(back[r].levels.size() == 3);
        for (int lvl = 0; lvl < 3; ++lvl) {
            CHECK(back[r].levels[lvl].channels == records[r].levels[lvl].channels);
            CHECK(back[r].levels[lvl].data == records[r].levels[lvl].data);  // bitwise
        }
        REQUIRE(back[r].gt.size() == records[r].gt.size());
        for (std::size_t i = 0; i < back[r].gt.size(); ++i)
            CHECK(back[r].gt[i] == records[r].gt[i]);
    }
}

TEST_CASE("bad magic is rejected") {
    const auto dir = fresh_dir("feat_magic");
    const auto path = dir / "bad.fsd";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE!\n{}\n";
    }
    CHECK_THROWS_AS(read_feature_dump(path), ParseError);
}

TEST_CASE("truncated payload is rejected") {
    const auto dir = fresh_dir("feat_trunc");
    const auto path = dir / "dump.fsd";
    write_feature_dump(path, {sample_record("a", 1)});
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 16);
    try {
        read_feature_dump(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("wrong level count is rejected on write and on read") {
    MultiLevelFeatures rec = sample_record("a", 1);
    rec.levels.pop_back();
    CHECK_THROWS_AS(write_feature_dump(fresh_dir("feat_lvl") / "x.fsd", {rec}), ValidationError);

    // handcrafted two-level file
    const auto dir = fresh_dir("feat_lvl2");
    const auto path = dir / "two.fsd";
    {
        std::ofstream out(path, std::ios::binary);
        out << "FSDF1\n";
        out << R"({"image_id":"x","image_w":8,"image_h":8,"levels":[{"C":1,"H":1,"W":1},)"
            << R"({"C":1,"H":1,"W":1}],"gt":[]})" << "\n";
        const float v = 0.0f;
        out.write(reinterpret_cast<const char*>(&v), 4);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    CHECK_THROWS_AS(read_feature_dump(path), ValidationError);
}

TEST_CASE("non-finite values are rejected") {
    MultiLevelFeatures rec = sample_record("a", 1);
    rec.levels[1].data[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(write_feature_dump(fresh_dir("feat_nan") / "x.fsd", {rec}),
                    ValidationError);

    // raw file carrying an infinity in the payload
    const auto dir = fresh_dir("feat_inf");
    const auto path = dir / "inf.fsd";
    {
        std::ofstream out(path, std::ios::binary);
        out << "FSDF1\n";
        out << R"({"image_id":"x","image_w":8,"image_h":8,"levels":[{"C":1,"H":1,"W":1},)"
            << R"({"C":1,"H":1,"W":1},{"C":1,"H":1,"W":1}],"gt":[]})" << "\n";
        const float inf = std::numeric_limits<float>::infinity();
        const float z = 0.0f;
        out.write(reinterpret_cast<const char*>(&inf), 4);
        out.write(reinterpret_cast<const char*>(&z), 4);
        out.write(reinterpret_cast<const char*>(&z), 4);
    }
    try {
        read_feature_dump(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    }
}

TEST_CASE("garbage header line is a parse error naming the record") {
    const auto dir = fresh_dir("feat_hdr");
    const auto path = dir / "hdr.fsd";
    {
        std::ofstream out(path, std::ios::binary);
        out << "FSDF1\n";
        out << "this is not json\n";
    }
    try {
        read_feature_dump(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("record 0") != std::string::npos);
    }
}

TEST_CASE("out-of-bounds gt boxes are rejected") {
    MultiLevelFeatures rec = sample_record("a", 1);
    rec.gt[0].bbox = BBox{-1, 0, 10, 10};
    CHECK_THROWS_AS(rec.validate(), ValidationError);
    rec.gt[0].bbox = BBox{0, 0, 300, 10};
    CHECK_THROWS_AS(rec.validate(), ValidationError);
    rec.gt[0].bbox = BBox{5, 5, 5, 10};  // degenerate
    CHECK_THROWS_AS(rec.validate(), ValidationError);
}
