#include "cpalign/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cpalign/error.hpp"
#include "cpalign/rng.hpp"
#include "cpalign/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cpalign {

std::string to_string(Domain d) {
    switch (d) {
        case Domain::source: return "source";
        case Domain::target: return "target";
        case Domain::augmented: return "augmented";
    }
    return "source";
}

Domain domain_from_string(std::string_view s) {
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    if (s == "augmented") return Domain::augmented;
    throw ParseError("unknown domain tag: '" + std::string(s) + "'");
}

const ImageRecord* DetectionDataset::find(std::string_view image_id) const {
    for (const auto& rec : images) {
        if (rec.image_id == image_id) return &rec;
    }
    return nullptr;
}

namespace {

bool safe_file_stem(const std::string& id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
}

void validate_record(const ImageRecord& rec, int num_classes) {
    if (rec.image_id.empty()) throw ValidationError("image with empty id");
    if (rec.width <= 0 || rec.height <= 0)
        throw ValidationError("image '" + rec.image_id + "': non-positive dimensions");
    const std::size_t expect = static_cast<std::size_t>(rec.width) * rec.height * 3;
    if (rec.pixels.pixels.size() != expect || rec.pixels.width != rec.width ||
        rec.pixels.height != rec.height)
        throw ValidationError("image '" + rec.image_id + "': pixel buffer does not match " +
                              std::to_string(rec.width) + "x" + std::to_string(rec.height));
    for (std::size_t i = 0; i < rec.annotations.size(); ++i) {
        const Annotation& a = rec.annotations[i];
        if (a.class_id < 0 || a.class_id >= num_classes)
            throw ValidationError("image '" + rec.image_id + "' annotation " + std::to_string(i) +
                                  ": class_id " + std::to_string(a.class_id) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
        if (!a.bbox.valid())
            throw ValidationError("image '" + rec.image_id + "' annotation " + std::to_string(i) +
                                  ": degenerate or invalid bbox");
        if (a.bbox.x_max > rec.width || a.bbox.y_max > rec.height)
            throw ValidationError("image '" + rec.image_id + "' annotation " + std::to_string(i) +
                                  ": bbox exceeds image bounds");
    }
}

std::vector<Annotation> parse_label_file(const fs::path& path, int num_classes, int img_w,
                                         int img_h) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label file: " + path.string());

    std::vector<Annotation> anns;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        long cls = -1;
        double cx, cy, w, h;
        std::string extra;
        if (!(ss >> cls >> cx >> cy >> w >> h) || (ss >> extra))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'class_id cx cy w h'");
        if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": non-finite coordinate");
        if (cls < 0 || cls >= num_classes)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": class_id " +
                                  std::to_string(cls) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
        Annotation a;
        a.class_id = static_cast<int>(cls);
        a.bbox.x_min = (cx - w / 2.0) * img_w;
        a.bbox.x_max = (cx + w / 2.0) * img_w;
        a.bbox.y_min = (cy - h / 2.0) * img_h;
        a.bbox.y_max = (cy + h / 2.0) * img_h;
        if (!(a.bbox.x_min < a.bbox.x_max) || !(a.bbox.y_min < a.bbox.y_max))
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": degenerate box (zero width or height)");
        if (a.bbox.x_min < 0.0 || a.bbox.y_min < 0.0 || a.bbox.x_max > img_w ||
            a.bbox.y_max > img_h)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": box outside image bounds (no clamping is applied)");
        anns.push_back(a);
    }
    return anns;
}

std::string format_label_line(const Annotation& a, int img_w, int img_h) {
    const double cx = (a.bbox.x_min + a.bbox.x_max) / 2.0 / img_w;
    const double cy = (a.bbox.y_min + a.bbox.y_max) / 2.0 / img_h;
    const double w = (a.bbox.x_max - a.bbox.x_min) / img_w;
    const double h = (a.bbox.y_max - a.bbox.y_min) / img_h;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", a.class_id, cx, cy, w, h);
    return buf;
}

}  // namespace

void validate_dataset(const DetectionDataset& ds) {
    if (ds.classes.empty()) throw ValidationError("dataset has an empty class list");
    std::unordered_set<std::string> seen;
    for (const auto& rec : ds.images) {
        if (!seen.insert(rec.image_id).second)
            throw ValidationError("duplicate image_id '" + rec.image_id + "'");
        validate_record(rec, ds.num_classes());
    }
}

DetectionDataset load_dataset(const fs::path& manifest_path, int threads) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("classes") || !doc.contains("images"))
        throw ParseError("manifest " + manifest_path.string() +
                         ": expected object with 'classes' and 'images'");

    DetectionDataset ds;
    for (const auto& c : doc.at("classes")) ds.classes.push_back(c.get<std::string>());
    if (ds.classes.empty())
        throw ValidationError("manifest " + manifest_path.string() + ": empty class list");
    if (doc.contains("domain")) ds.domain = domain_from_string(doc.at("domain").get<std::string>());

    struct Entry {
        std::string id;
        fs::path image_path;
        fs::path label_path;
        Domain domain;
    };
    const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : ".";
    std::vector<Entry> entries;
    for (const auto& item : doc.at("images")) {
        Entry e;
        try {
            e.id = item.at("id").get<std::string>();
            e.image_path = base / item.at("image_path").get<std::string>();
            e.label_path = base / item.at("label_path").get<std::string>();
            e.domain = domain_from_string(item.at("domain").get<std::string>());
        } catch (const json::exception& ex) {
            throw ParseError("manifest " + manifest_path.string() + ": bad image entry: " +
                             ex.what());
        }
        entries.push_back(std::move(e));
    }

    // Existence is checked up front so a missing file fails fast with its path.
    for (const auto& e : entries) {
        if (!fs::exists(e.image_path)) throw IoError("missing image file: " + e.image_path.string());
        if (!fs::exists(e.label_path)) throw IoError("missing label file: " + e.label_path.string());
    }

    ds.images.resize(entries.size());
    parallel_for(entries.size(), threads, [&](std::size_t i) {
        const Entry& e = entries[i];
        ImageRecord rec;
        rec.image_id = e.id;
        rec.domain = e.domain;
        rec.pixels = read_image(e.image_path);
        rec.width = rec.pixels.width;
        rec.height = rec.pixels.height;
        rec.annotations = parse_label_file(e.label_path, ds.num_classes(), rec.width, rec.height);
        ds.images[i] = std::move(rec);
    });

    validate_dataset(ds);
    return ds;
}

fs::path save_dataset(const DetectionDataset& ds, const fs::path& out_dir) {
    validate_dataset(ds);
    for (const auto& rec : ds.images) {
        if (!safe_file_stem(rec.image_id))
            throw ValidationError("image_id '" + rec.image_id +
                                  "' is not usable as a file name");
    }

    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    fs::create_directories(out_dir / "labels", ec);
    if (!fs::is_directory(out_dir / "images") || !fs::is_directory(out_dir / "labels"))
        throw IoError("cannot create output directory: " + out_dir.string());

    json manifest;
    manifest["classes"] = ds.classes;
    manifest["domain"] = to_string(ds.domain);
    manifest["images"] = json::array();

    for (const auto& rec : ds.images) {
        const std::string img_rel = "images/" + rec.image_id + ".png";
        const std::string lbl_rel = "labels/" + rec.image_id + ".txt";
        write_image(rec.pixels, out_dir / img_rel);

        std::ofstream lbl(out_dir / lbl_rel, std::ios::binary | std::ios::trunc);
        if (!lbl) throw IoError("cannot write label file: " + (out_dir / lbl_rel).string());
        for (const auto& a : rec.annotations) lbl << format_label_line(a, rec.width, rec.height);
        lbl.close();
        if (lbl.fail()) throw IoError("write failed: " + (out_dir / lbl_rel).string());

        manifest["images"].push_back({{"id", rec.image_id},
                                      {"image_path", img_rel},
                                      {"label_path", lbl_rel},
                                      {"domain", to_string(rec.domain)}});
    }

    const fs::path manifest_path = out_dir / "manifest.json";
    std::ofstream mf(manifest_path, std::ios::binary | std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest: " + manifest_path.string());
    mf << manifest.dump(2) << "\n";
    mf.close();
    if (mf.fail()) throw IoError("write failed: " + manifest_path.string());
    return manifest_path;
}

DetectionDataset sample_kshot(const DetectionDataset& ds, int k, std::uint64_t seed) {
    if (k <= 0) throw ValidationError("sample_kshot: k must be positive");
    validate_dataset(ds);

    // Image ids containing each class, in dataset order.
    std::vector<std::vector<std::size_t>> presence(ds.classes.size());
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        std::vector<bool> seen(ds.classes.size(), false);
        for (const auto& a : ds.images[i].annotations) {
            if (!seen[a.class_id]) {
                seen[a.class_id] = true;
                presence[a.class_id].push_back(i);
            }
        }
    }

    Rng rng(seed);
    std::vector<bool> selected(ds.images.size(), false);
    for (std::size_t c = 0; c < presence.size(); ++c) {
        auto& pool = presence[c];
        if (pool.size() < static_cast<std::size_t>(k))
            throw ValidationError("sample_kshot: class '" + ds.classes[c] + "' appears in only " +
                                  std::to_string(pool.size()) + " images, need " +
                                  std::to_string(k));
        // Partial Fisher-Yates: the first k entries become the class's picks.
        for (int j = 0; j < k; ++j) {
            const std::size_t swap_with = j + rng.index(pool.size() - j);
            std::swap(pool[j], pool[swap_with]);
            selected[pool[j]] = true;
        }
    }

    DetectionDataset out;
    out.classes = ds.classes;
    out.domain = ds.domain;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        if (selected[i]) out.images.push_back(ds.images[i]);
    }
    return out;
}

DetectionDataset sample_random_images(const DetectionDataset& ds, int count, std::uint64_t seed) {
    if (count <= 0) throw ValidationError("sample_random_images: count must be positive");
    if (static_cast<std::size_t>(count) > ds.images.size())
        throw ValidationError("sample_random_images: requested " + std::to_string(count) +
                              " images from a dataset of " + std::to_string(ds.images.size()));

    std::vector<std::size_t> idx(ds.images.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (int j = 0; j < count; ++j) {
        const std::size_t swap_with = j + rng.index(idx.size() - j);
        std::swap(idx[j], idx[swap_with]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());  // keep dataset order in the output

    DetectionDataset out;
    out.classes = ds.classes;
    out.domain = ds.domain;
    for (const std::size_t i : idx) out.images.push_back(ds.images[i]);
    return out;
}

}  // namespace cpalign
