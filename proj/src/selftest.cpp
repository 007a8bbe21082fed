#include "cpalign/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpalign/balance.hpp"
#include "cpalign/compose.hpp"
#include "cpalign/image.hpp"
#include "cpalign/loss.hpp"
#include "cpalign/metrics.hpp"
#include "cpalign/rng.hpp"

namespace cpalign {

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Image img(w, h);
    Rng rng(seed);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.uniform_below(256));
    return img;
}

ImageRecord record(std::string id, int w, int h, std::vector<Annotation> anns, Domain domain) {
    ImageRecord rec;
    rec.image_id = std::move(id);
    rec.width = w;
    rec.height = h;
    rec.pixels = noise_image(w, h, fnv1a64(rec.image_id));
    rec.annotations = std::move(anns);
    rec.domain = domain;
    return rec;
}

Annotation box(int cls, double x0, double y0, double x1, double y1) {
    return Annotation{cls, BBox{x0, y0, x1, y1}, SourceFlag::original};
}

/// Skewed two-class source plus a small annotated target set.
std::pair<DetectionDataset, DetectionDataset> fixture() {
    DetectionDataset src;
    src.classes = {"alpha", "beta"};
    src.domain = Domain::source;
    for (int i = 0; i < 3; ++i) {
        std::vector<Annotation> anns;
        for (int j = 0; j < 8; ++j) {
            const int gx = (j % 4) * 12;
            const int gy = (j / 4) * 12;
            anns.push_back(box(0, gx + 1, gy + 1, gx + 8, gy + 8));
        }
        anns.push_back(box(1, 1, 40, 8, 47));
        src.images.push_back(record("dense_" + std::to_string(i), 64, 64, std::move(anns),
                                    Domain::source));
    }
    for (int i = 0; i < 8; ++i) {
        src.images.push_back(record("empty_" + std::to_string(i), 64, 64, {}, Domain::source));
    }

    DetectionDataset tgt;
    tgt.classes = src.classes;
    tgt.domain = Domain::target;
    tgt.images.push_back(record("t0", 32, 32, {box(0, 2, 2, 9, 9)}, Domain::target));
    tgt.images.push_back(record("t1", 32, 32, {box(1, 10, 10, 18, 18)}, Domain::target));
    return {src, tgt};
}

std::vector<InstanceFeature> toy_instances(int n, int dim, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<InstanceFeature> xs;
    for (int i = 0; i < n; ++i) {
        InstanceFeature f;
        f.image_id = "toy";
        f.instance_index = i;
        f.class_id = i % classes;
        f.level = 0;
        f.vector.resize(dim);
        for (auto& v : f.vector) v = rng.uniform(0.2, 2.0);
        xs.push_back(std::move(f));
    }
    return xs;
}

}  // namespace

int run_selftest(std::ostream& out) {
    struct Check {
        const char* name;
        std::function<void()> run;
    };

    const auto [src, tgt] = fixture();

    const std::vector<Check> checks = {
        {"balance reaches the class target and keeps the dataset size",
         [&] {
             BalanceConfig cfg;
             cfg.seed = 5;
             const BalanceResult res = balance_dataset(src, tgt, cfg);
             if (res.dataset.images.size() != src.images.size())
                 throw std::runtime_error("dataset size changed");
             std::vector<std::int64_t> counts(2, 0);
             for (const auto& rec : res.dataset.images)
                 for (const auto& a : rec.annotations) ++counts[a.class_id];
             const std::int64_t target =
                 static_cast<std::int64_t>(std::ceil(0.9 * 24.0));  // 24 alpha boxes
             if (counts[1] < target)
                 throw std::runtime_error("class beta ended at " + std::to_string(counts[1]));
         }},
        {"pasted boxes never overlap existing ones",
         [&] {
             BalanceConfig cfg;
             cfg.seed = 6;
             const BalanceResult res = balance_dataset(src, tgt, cfg);
             for (const auto& rec : res.dataset.images) {
                 for (std::size_t i = 0; i < rec.annotations.size(); ++i) {
                     for (std::size_t j = i + 1; j < rec.annotations.size(); ++j) {
                         const bool pasted =
                             rec.annotations[i].source_flag == SourceFlag::pasted ||
                             rec.annotations[j].source_flag == SourceFlag::pasted;
                         if (pasted &&
                             iou(rec.annotations[i].bbox, rec.annotations[j].bbox) != 0.0)
                             throw std::runtime_error("overlap in " + rec.image_id);
                     }
                 }
             }
         }},
        {"balance is reproducible across thread counts",
         [&] {
             BalanceConfig cfg;
             cfg.seed = 7;
             cfg.threads = 1;
             const BalanceResult a = balance_dataset(src, tgt, cfg);
             cfg.threads = 4;
             const BalanceResult b = balance_dataset(src, tgt, cfg);
             for (std::size_t i = 0; i < a.dataset.images.size(); ++i) {
                 if (!(a.dataset.images[i].pixels == b.dataset.images[i].pixels))
                     throw std::runtime_error("pixel divergence at " +
                                              a.dataset.images[i].image_id);
             }
         }},
        {"every composed batch holds exactly one target image",
         [&] {
             std::vector<std::string> s{"s0", "s1", "s2"}, a{"a0", "a1", "a2", "a3"},
                 t{"t0", "t1"};
             ComposeConfig cfg;
             cfg.num_batches = 50;
             cfg.seed = 8;
             for (const auto& batch : compose_schedule(s, a, t, cfg).batches) {
                 int targets = 0;
                 for (const auto& slot : batch)
                     if (slot.pool == Domain::target) ++targets;
                 if (targets != 1) throw std::runtime_error("batch without a single target");
             }
         }},
        {"losses are invariant under instance permutation",
         [&] {
             const auto xs = toy_instances(8, 5, 3, 9);
             auto rev = xs;
             std::reverse(rev.begin(), rev.end());
             if (similarity_loss(xs, SimilarityForm::one_minus_cos).value !=
                 similarity_loss(rev, SimilarityForm::one_minus_cos).value)
                 throw std::runtime_error("similarity changed under permutation");
             if (dissimilarity_loss(xs, 0.3).value != dissimilarity_loss(rev, 0.3).value)
                 throw std::runtime_error("dissimilarity changed under permutation");
         }},
        {"analytic gradients agree with finite differences",
         [&] {
             auto xs = toy_instances(6, 4, 2, 10);
             const SingleLossResult res =
                 similarity_loss(xs, SimilarityForm::one_minus_cos);
             const double h = 1e-6;
             for (const std::size_t i : {std::size_t{0}, std::size_t{3}}) {
                 for (std::size_t d = 0; d < 4; ++d) {
                     auto plus = xs;
                     auto minus = xs;
                     plus[i].vector[d] += h;
                     minus[i].vector[d] -= h;
                     const double num =
                         (similarity_loss(plus, SimilarityForm::one_minus_cos).value -
                          similarity_loss(minus, SimilarityForm::one_minus_cos).value) /
                         (2 * h);
                     const double ana = res.grads[i][d];
                     const double scale = std::max({std::fabs(num), std::fabs(ana), 1e-3});
                     if (std::fabs(num - ana) > 1e-5 * scale)
                         throw std::runtime_error("gradient mismatch at coordinate " +
                                                  std::to_string(d));
                 }
             }
         }},
        {"precision envelope integrates a known fixture",
         [&] {
             const std::vector<Detection> dets = {
                 {"i", 0, BBox{0, 0, 10, 10}, 0.9},
                 {"i", 0, BBox{40, 40, 50, 50}, 0.8},
                 {"i", 0, BBox{20, 0, 30, 10}, 0.7},
             };
             const std::vector<GroundTruthBox> gts = {
                 {"i", 0, BBox{0, 0, 10, 10}},
                 {"i", 0, BBox{20, 0, 30, 10}},
             };
             const double ap = average_precision(dets, gts, 0.5);
             if (std::fabs(ap - 5.0 / 6.0) > 1e-12)
                 throw std::runtime_error("AP " + std::to_string(ap));
         }},
        {"png encoding round trips pixels exactly",
         [&] {
             const Image img = noise_image(37, 23, 123);
             const Image back = decode_image(encode_png(img), "selftest");
             if (!(back == img)) throw std::runtime_error("pixel mismatch");
         }},
    };

    int failures = 0;
    for (const auto& check : checks) {
        try {
            check.run();
            out << "ok   " << check.name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            out << "FAIL " << check.name << ": " << e.what() << "\n";
        }
    }
    out << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed")
        << "\n";
    return failures;
}

}  // namespace cpalign
