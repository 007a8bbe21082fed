#include "cpalign/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cpalign/error.hpp"

using nlohmann::json;

namespace cpalign {

namespace {

constexpr char kMagic[] = "FSDF1";

void check_finite(const FeatureMap& fm, const std::string& image_id, int level) {
    for (const float v : fm.data) {
        if (!std::isfinite(v)) {
            throw ValidationError("feature dump: non-finite value in image '" + image_id +
                                  "' level " + std::to_string(level));
        }
    }
}

std::uint32_t f32_bits(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return bits;
}

float bits_f32(std::uint32_t bits) {
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

void FeatureMap::validate() const {
    if (channels < 1 || height < 1 || width < 1)
        throw ValidationError("FeatureMap: dimensions must be positive");
    if (data.size() != static_cast<std::size_t>(channels) * height * width)
        throw ValidationError("FeatureMap: payload size does not match C*H*W");
}

void MultiLevelFeatures::validate() const {
    if (image_id.empty()) throw ValidationError("feature record: empty image_id");
    if (image_w < 1 || image_h < 1)
        throw ValidationError("feature record '" + image_id + "': bad image size");
    if (levels.size() != static_cast<std::size_t>(kNumFeatureLevels))
        throw ValidationError("feature record '" + image_id + "': expected " +
                              std::to_string(kNumFeatureLevels) + " levels, got " +
                              std::to_string(levels.size()));
    for (const auto& fm : levels) fm.validate();
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const InstanceLabel& g = gt[i];
        if (g.class_id < 0)
            throw ValidationError("feature record '" + image_id + "': negative class_id");
        if (!g.bbox.valid() || g.bbox.x_min < 0 || g.bbox.y_min < 0 || g.bbox.x_max > image_w ||
            g.bbox.y_max > image_h)
            throw ValidationError("feature record '" + image_id + "': box " + std::to_string(i) +
                                  " invalid or out of bounds");
    }
}

void write_feature_dump(const std::filesystem::path& path,
                        const std::vector<MultiLevelFeatures>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << kMagic << '\n';

    std::string payload;
    for (const auto& rec : records) {
        rec.validate();
        json header;
        header["image_id"] = rec.image_id;
        header["image_w"] = rec.image_w;
        header["image_h"] = rec.image_h;
        header["levels"] = json::array();
        for (const auto& fm : rec.levels) {
            header["levels"].push_back({{"C", fm.channels}, {"H", fm.height}, {"W", fm.width}});
        }
        header["gt"] = json::array();
        for (const auto& g : rec.gt) {
            header["gt"].push_back(
                {{"class_id", g.class_id},
                 {"bbox", {g.bbox.x_min, g.bbox.y_min, g.bbox.x_max, g.bbox.y_max}},
                 {"domain", to_string(g.domain)}});
        }
        out << header.dump() << '\n';

        payload.clear();
        for (std::size_t lvl = 0; lvl < rec.levels.size(); ++lvl) {
            check_finite(rec.levels[lvl], rec.image_id, static_cast<int>(lvl));
            for (const float v : rec.levels[lvl].data) {
                const std::uint32_t bits = f32_bits(v);
                payload.push_back(static_cast<char>(bits & 0xff));
                payload.push_back(static_cast<char>((bits >> 8) & 0xff));
                payload.push_back(static_cast<char>((bits >> 16) & 0xff));
                payload.push_back(static_cast<char>((bits >> 24) & 0xff));
            }
        }
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::vector<MultiLevelFeatures> read_feature_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw ParseError("'" + path.string() + "': not a feature dump (bad magic)");

    std::vector<MultiLevelFeatures> records;
    std::string payload;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        json header;
        try {
            header = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("'" + path.string() + "': bad header for record " +
                             std::to_string(records.size()) + ": " + e.what());
        }

        MultiLevelFeatures rec;
        try {
            rec.image_id = header.at("image_id").get<std::string>();
            rec.image_w = header.at("image_w").get<int>();
            rec.image_h = header.at("image_h").get<int>();
            for (const auto& shape : header.at("levels")) {
                FeatureMap fm(shape.at("C").get<int>(), shape.at("H").get<int>(),
                              shape.at("W").get<int>());
                rec.levels.push_back(std::move(fm));
            }
            for (const auto& g : header.at("gt")) {
                InstanceLabel label;
                label.class_id = g.at("class_id").get<int>();
                const auto& bb = g.at("bbox");
                label.bbox = BBox{bb.at(0).get<double>(), bb.at(1).get<double>(),
                                  bb.at(2).get<double>(), bb.at(3).get<double>()};
                label.domain = domain_from_string(g.at("domain").get<std::string>());
                rec.gt.push_back(label);
            }
        } catch (const json::exception& e) {
            throw ParseError("'" + path.string() + "': header fields for record " +
                             std::to_string(records.size()) + ": " + e.what());
        }
        if (rec.levels.size() != static_cast<std::size_t>(kNumFeatureLevels))
            throw ValidationError("'" + path.string() + "': record '" + rec.image_id +
                                  "' has " + std::to_string(rec.levels.size()) +
                                  " levels, expected " + std::to_string(kNumFeatureLevels));

        for (std::size_t lvl = 0; lvl < rec.levels.size(); ++lvl) {
            FeatureMap& fm = rec.levels[lvl];
            fm.validate();
            payload.resize(fm.data.size() * 4);
            if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size())))
                throw ParseError("'" + path.string() + "': truncated payload in record '" +
                                 rec.image_id + "' level " + std::to_string(lvl));
            for (std::size_t i = 0; i < fm.data.size(); ++i) {
                const auto* b = reinterpret_cast<const unsigned char*>(payload.data() + i * 4);
                const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                           (static_cast<std::uint32_t>(b[1]) << 8) |
                                           (static_cast<std::uint32_t>(b[2]) << 16) |
                                           (static_cast<std::uint32_t>(b[3]) << 24);
                fm.data[i] = bits_f32(bits);
            }
            check_finite(fm, rec.image_id, static_cast<int>(lvl));
        }
        rec.validate();
        records.push_back(std::move(rec));
    }
    return records;
}

FeatureMap upsample_level(const FeatureMap& level, int size) {
    level.validate();
    if (size < 1) throw ValidationError("upsample_level: size must be >= 1");
    if (size == level.height && size == level.width) return level;

    FeatureMap out(level.channels, size, size);
    // Corner-aligned source coordinate for output index i; collapses to 0
    // when either side has a single sample.
    auto src_coord = [size](int i, int extent) {
        if (size == 1 || extent == 1) return 0.0;
        return static_cast<double>(i) * (extent - 1) / (size - 1);
    };

    std::vector<int> x0(size), x1(size);
    std::vector<double> tx(size);
    for (int j = 0; j < size; ++j) {
        const double x = src_coord(j, level.width);
        x0[j] = static_cast<int>(std::floor(x));
        x1[j] = std::min(x0[j] + 1, level.width - 1);
        tx[j] = x - x0[j];
    }

    for (int c = 0; c < level.channels; ++c) {
        for (int i = 0; i < size; ++i) {
            const double y = src_coord(i, level.height);
            const int y0 = static_cast<int>(std::floor(y));
            const int y1 = std::min(y0 + 1, level.height - 1);
            const double ty = y - y0;
            for (int j = 0; j < size; ++j) {
                const double a = level.at(c, y0, x0[j]);
                const double b = level.at(c, y0, x1[j]);
                const double d = level.at(c, y1, x0[j]);
                const double e = level.at(c, y1, x1[j]);
                const double top = a + tx[j] * (b - a);
                const double bot = d + tx[j] * (e - d);
                out.at(c, i, j) = static_cast<float>(top + ty * (bot - top));
            }
        }
    }
    return out;
}

std::vector<InstanceFeature> pool_instances(const MultiLevelFeatures& record, int grid_size) {
    record.validate();
    if (grid_size < 2) throw ValidationError("pool_instances: grid_size must be >= 2");

    std::vector<InstanceFeature> out;
    out.reserve(record.gt.size() * record.levels.size());

    for (std::size_t lvl = 0; lvl < record.levels.size(); ++lvl) {
        const FeatureMap grid = upsample_level(record.levels[lvl], grid_size);
        for (std::size_t i = 0; i < record.gt.size(); ++i) {
            const InstanceLabel& g = record.gt[i];
            // Outward-rounded cell range; degenerate spans widen to one cell.
            int gx0 = static_cast<int>(
                std::floor(g.bbox.x_min * grid_size / static_cast<double>(record.image_w)));
            int gx1 = static_cast<int>(
                std::ceil(g.bbox.x_max * grid_size / static_cast<double>(record.image_w)));
            int gy0 = static_cast<int>(
                std::floor(g.bbox.y_min * grid_size / static_cast<double>(record.image_h)));
            int gy1 = static_cast<int>(
                std::ceil(g.bbox.y_max * grid_size / static_cast<double>(record.image_h)));
            gx0 = std::max(0, std::min(gx0, grid_size - 1));
            gy0 = std::max(0, std::min(gy0, grid_size - 1));
            gx1 = std::max(gx0 + 1, std::min(gx1, grid_size));
            gy1 = std::max(gy0 + 1, std::min(gy1, grid_size));

            InstanceFeature feat;
            feat.image_id = record.image_id;
            feat.instance_index = static_cast<int>(i);
            feat.class_id = g.class_id;
            feat.domain = g.domain;
            feat.level = static_cast<int>(lvl);
            feat.vector.resize(grid.channels);
            const double cells = static_cast<double>(gx1 - gx0) * (gy1 - gy0);
            for (int c = 0; c < grid.channels; ++c) {
                double acc = 0.0;
                for (int y = gy0; y < gy1; ++y)
                    for (int x = gx0; x < gx1; ++x) acc += grid.at(c, y, x);
                feat.vector[c] = acc / cells;
            }
            out.push_back(std::move(feat));
        }
    }
    return out;
}

}  // namespace cpalign
