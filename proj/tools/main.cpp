// Command-line front end for the dataset balancing and alignment toolkit.
//
// Exit codes: 0 success, 1 data or validation failure, 2 usage error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpalign/balance.hpp"
#include "cpalign/compose.hpp"
#include "cpalign/error.hpp"
#include "cpalign/loss.hpp"
#include "cpalign/metrics.hpp"
#include "cpalign/selftest.hpp"
#include "cpalign/stats.hpp"

using nlohmann::json;
using namespace cpalign;

namespace {

void echo_config(const json& resolved) { std::cerr << resolved.dump(2) << "\n"; }

/// Image ids listed in a dataset manifest, without loading any pixels.
std::vector<std::string> manifest_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("manifest '" + path + "': " + e.what());
    }
    std::vector<std::string> ids;
    for (const auto& img : j.at("images")) ids.push_back(img.at("id").get<std::string>());
    return ids;
}

json stats_to_json(const ClassStats& stats, const DetectionDataset& ds) {
    json j;
    j["r"] = stats.r;
    j["num_images"] = ds.images.size();
    j["max_count"] = stats.max_count();
    j["sparse_count"] = stats.sparse_images.size();
    j["dense_count"] = stats.dense_images.size();
    j["sparse_images"] = stats.sparse_images;
    j["dense_images"] = stats.dense_images;
    j["classes"] = json::array();
    for (std::size_t c = 0; c < stats.per_class_count.size(); ++c) {
        j["classes"].push_back({{"class_id", c},
                                {"name", ds.classes[c]},
                                {"count", stats.per_class_count[c]},
                                {"images_with_class", stats.class_presence[c].size()}});
    }
    return j;
}

json plan_to_json(const IncrementPlan& plan) {
    json j = json::array();
    for (const auto& ci : plan.classes) {
        json rows = json::array();
        for (const auto& asg : ci.assignments) {
            rows.push_back({{"receiver", asg.receiving_image_id},
                            {"donor", asg.donor_image_id},
                            {"donor_annotation", asg.donor_annotation_index},
                            {"copies", asg.copies}});
        }
        j.push_back({{"class_id", ci.class_id},
                     {"requested", ci.requested},
                     {"total_increments", ci.total_increments},
                     {"assignments", std::move(rows)}});
    }
    return j;
}

int cmd_stats(const std::string& source, int r, bool with_plan, double beta, int cap,
              std::uint64_t seed, int threads) {
    echo_config({{"command", "stats"},
                 {"source", source},
                 {"r", r},
                 {"plan", with_plan},
                 {"balance_factor", beta},
                 {"cap_per_image", cap},
                 {"seed", seed},
                 {"threads", threads}});
    const DetectionDataset ds = load_dataset(source, threads);
    const ClassStats stats = compute_stats(ds, r);
    json out = stats_to_json(stats, ds);
    if (with_plan) {
        out["plan"] = plan_to_json(compute_increment_plan(stats, {beta, cap}, seed));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_balance(const std::string& source, const std::string& target, const std::string& out_dir,
                const BalanceConfig& cfg) {
    echo_config({{"command", "balance"},
                 {"source", source},
                 {"target", target},
                 {"out", out_dir},
                 {"r", cfg.r},
                 {"balance_factor", cfg.balance_factor},
                 {"cap_per_image", cfg.cap_per_image},
                 {"stride", cfg.stride},
                 {"intensity_scale", {cfg.augment.intensity_scale_lo, cfg.augment.intensity_scale_hi}},
                 {"blur_sigma", {cfg.augment.blur_sigma_lo, cfg.augment.blur_sigma_hi}},
                 {"augment_injected_cell", cfg.augment_injected_cell},
                 {"max_inject_tries", cfg.max_inject_tries},
                 {"min_increment_fraction", cfg.min_increment_fraction},
                 {"seed", cfg.seed},
                 {"threads", cfg.threads}});
    const DetectionDataset src = load_dataset(source, cfg.threads);
    const DetectionDataset tgt = load_dataset(target, cfg.threads);
    const BalanceResult res = balance_dataset(src, tgt, cfg);
    const auto manifest = save_dataset(res.dataset, out_dir);
    json out;
    out["output_manifest"] = manifest.string();
    out["report"] = json::parse(to_json(res.report));
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_sample(const std::string& source, const std::string& out_dir, std::optional<int> kshot,
               std::optional<int> random_count, std::uint64_t seed, int threads) {
    echo_config({{"command", "sample"},
                 {"source", source},
                 {"out", out_dir},
                 {"kshot", kshot ? json(*kshot) : json()},
                 {"random", random_count ? json(*random_count) : json()},
                 {"seed", seed},
                 {"threads", threads}});
    const DetectionDataset ds = load_dataset(source, threads);
    const DetectionDataset picked =
        kshot ? sample_kshot(ds, *kshot, seed) : sample_random_images(ds, *random_count, seed);
    const auto manifest = save_dataset(picked, out_dir);
    json out;
    out["output_manifest"] = manifest.string();
    out["images"] = picked.images.size();
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_compose(const std::string& source, const std::string& augmented,
                const std::string& target, const ComposeConfig& cfg, const std::string& out) {
    echo_config({{"command", "compose"},
                 {"source", source},
                 {"augmented", augmented},
                 {"target", target},
                 {"batch_size", cfg.batch_size},
                 {"num_batches", cfg.num_batches},
                 {"source_fraction", cfg.source_fraction},
                 {"seed", cfg.seed},
                 {"out", out}});
    const BatchSchedule sched = compose_schedule(manifest_ids(source), manifest_ids(augmented),
                                                 manifest_ids(target), cfg);
    const std::string jsonl = to_jsonl(sched);
    if (out == "-") {
        std::cout << jsonl;
    } else {
        std::ofstream f(out, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + out + "' for writing");
        f << jsonl;
        if (!f) throw IoError("short write to '" + out + "'");
    }
    return 0;
}

std::array<ClassifierHead, kNumFeatureLevels>
load_heads(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open heads file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("heads file '" + path + "': " + e.what());
    }
    std::array<ClassifierHead, kNumFeatureLevels> heads;
    const auto& levels = j.at("levels");
    if (levels.size() != kNumFeatureLevels)
        throw ValidationError("heads file '" + path + "': expected " +
                              std::to_string(kNumFeatureLevels) + " levels");
    for (int lvl = 0; lvl < kNumFeatureLevels; ++lvl) {
        const auto& h = levels[lvl];
        heads[lvl].num_classes = h.at("num_classes").get<int>();
        heads[lvl].dim = h.at("dim").get<int>();
        heads[lvl].weights = h.at("weights").get<std::vector<double>>();
        heads[lvl].bias = h.at("bias").get<std::vector<double>>();
        heads[lvl].validate();
    }
    return heads;
}

/// Zero heads shaped from the dump: per-level dim from the level's channel
/// count, class count from the largest class id present.
std::array<ClassifierHead, kNumFeatureLevels>
default_heads(const std::vector<MultiLevelFeatures>& records) {
    if (records.empty()) throw ValidationError("feature dump holds no records");
    int num_classes = 1;
    for (const auto& rec : records)
        for (const auto& g : rec.gt) num_classes = std::max(num_classes, g.class_id + 1);
    std::array<ClassifierHead, kNumFeatureLevels> heads;
    for (int lvl = 0; lvl < kNumFeatureLevels; ++lvl)
        heads[lvl] = ClassifierHead::zeros(num_classes, records[0].levels[lvl].channels);
    return heads;
}

int cmd_loss_eval(const std::string& features, const std::string& heads_path, int grid,
                  const LossConfig& cfg, const std::string& form, const std::string& grads_out) {
    echo_config({{"command", "loss-eval"},
                 {"features", features},
                 {"heads", heads_path.empty() ? json() : json(heads_path)},
                 {"grid", grid},
                 {"lambda_sim", cfg.lambda_sim},
                 {"lambda_dis", cfg.lambda_dis},
                 {"lambda_cls", cfg.lambda_cls},
                 {"margin", cfg.margin},
                 {"similarity_form", form},
                 {"grads_out", grads_out.empty() ? json() : json(grads_out)}});
    const auto records = read_feature_dump(features);
    const auto heads = heads_path.empty() ? default_heads(records) : load_heads(heads_path);
    const BatchLossResult res = i2da_loss_on_batch(records, heads, cfg, grid);
    std::cout << to_json(res.result) << "\n";

    if (!grads_out.empty()) {
        json g;
        g["levels"] = json::array();
        for (int lvl = 0; lvl < kNumFeatureLevels; ++lvl) {
            json level;
            level["instances"] = json::array();
            for (std::size_t i = 0; i < res.instances[lvl].size(); ++i) {
                const InstanceFeature& f = res.instances[lvl][i];
                level["instances"].push_back({{"image_id", f.image_id},
                                              {"instance_index", f.instance_index},
                                              {"class_id", f.class_id},
                                              {"domain", to_string(f.domain)},
                                              {"level", f.level},
                                              {"grad", res.result.grads[lvl][i]}});
            }
            level["head"] = {{"weights", res.result.head_grads[lvl].weights},
                             {"bias", res.result.head_grads[lvl].bias}};
            g["levels"].push_back(std::move(level));
        }
        std::ofstream f(grads_out, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + grads_out + "' for writing");
        f << g.dump(2) << "\n";
        if (!f) throw IoError("short write to '" + grads_out + "'");
    }
    return 0;
}

std::vector<Detection> load_detections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open detections file '" + path + "'");
    std::vector<Detection> dets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            Detection d;
            d.image_id = j.at("image_id").get<std::string>();
            d.class_id = j.at("class_id").get<int>();
            const auto& bb = j.at("bbox");
            d.bbox = BBox{bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                          bb.at(3).get<double>()};
            d.confidence = j.at("confidence").get<double>();
            dets.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw ParseError("detections '" + path + "' line " + std::to_string(line_no) + ": " +
                             e.what());
        }
    }
    return dets;
}

int cmd_metrics(const std::string& detections, const std::string& ground_truth, int threads) {
    echo_config({{"command", "metrics"},
                 {"detections", detections},
                 {"ground_truth", ground_truth},
                 {"threads", threads}});
    const std::vector<Detection> dets = load_detections(detections);
    const DetectionDataset ds = load_dataset(ground_truth, threads);
    std::vector<GroundTruthBox> gts;
    for (const auto& rec : ds.images)
        for (const auto& a : rec.annotations)
            gts.push_back({rec.image_id, a.class_id, a.bbox});
    std::cout << to_json(map_suite(dets, gts)) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cut-paste dataset balancing and instance alignment toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from a TOML file");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Class statistics of a dataset");
    std::string st_source;
    int st_r = 6;
    bool st_plan = false;
    double st_beta = 0.9;
    int st_cap = 4;
    std::uint64_t st_seed = 0;
    int st_threads = 1;
    stats_cmd->add_option("--source", st_source, "Source dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    stats_cmd->add_option("--r", st_r, "Object-count threshold between sparse and dense");
    stats_cmd->add_flag("--plan", st_plan, "Also print the paste increment plan");
    stats_cmd->add_option("--beta", st_beta, "Balance factor for the plan");
    stats_cmd->add_option("--cap", st_cap, "Per-image per-class paste cap");
    stats_cmd->add_option("--seed", st_seed, "Plan rotation seed");
    stats_cmd->add_option("--threads", st_threads, "Loader threads");

    // balance
    auto* balance_cmd = app.add_subcommand("balance", "Rebalance classes by cut-paste");
    std::string ba_source, ba_target, ba_out;
    BalanceConfig ba_cfg;
    bool ba_no_cell_augment = false;
    balance_cmd->add_option("--source", ba_source, "Source dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    balance_cmd->add_option("--target", ba_target, "Target dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    balance_cmd->add_option("--out", ba_out, "Output dataset directory")->required();
    balance_cmd->add_option("--r", ba_cfg.r, "Object-count threshold between sparse and dense");
    balance_cmd->add_option("--beta", ba_cfg.balance_factor, "Balance factor");
    balance_cmd->add_option("--cap", ba_cfg.cap_per_image, "Per-image per-class paste cap");
    balance_cmd->add_option("--stride", ba_cfg.stride, "Empty-region search stride");
    balance_cmd->add_option("--intensity-lo", ba_cfg.augment.intensity_scale_lo,
                            "Lower intensity jitter bound");
    balance_cmd->add_option("--intensity-hi", ba_cfg.augment.intensity_scale_hi,
                            "Upper intensity jitter bound");
    balance_cmd->add_option("--blur-lo", ba_cfg.augment.blur_sigma_lo, "Lower blur sigma");
    balance_cmd->add_option("--blur-hi", ba_cfg.augment.blur_sigma_hi, "Upper blur sigma");
    balance_cmd->add_flag("--no-augment-cell", ba_no_cell_augment,
                          "Paste injected target cells without augmentation");
    balance_cmd->add_option("--max-inject-tries", ba_cfg.max_inject_tries,
                            "Donor resamples before an injection counts as failed");
    balance_cmd->add_option("--min-increment-fraction", ba_cfg.min_increment_fraction,
                            "Fail when a class lands below this fraction of its plan");
    balance_cmd->add_option("--seed", ba_cfg.seed, "Pipeline seed");
    balance_cmd->add_option("--threads", ba_cfg.threads, "Worker threads");

    // sample
    auto* sample_cmd = app.add_subcommand("sample", "Draw a dataset subset");
    std::string sa_source, sa_out;
    std::optional<int> sa_kshot, sa_random;
    std::uint64_t sa_seed = 0;
    int sa_threads = 1;
    sample_cmd->add_option("--source", sa_source, "Source dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    sample_cmd->add_option("--out", sa_out, "Output dataset directory")->required();
    auto* kshot_opt =
        sample_cmd->add_option("--kshot", sa_kshot, "Pick k images per class, union kept once");
    auto* random_opt =
        sample_cmd->add_option("--random", sa_random, "Pick this many images uniformly");
    kshot_opt->excludes(random_opt);
    sample_cmd->add_option("--seed", sa_seed, "Sampling seed");
    sample_cmd->add_option("--threads", sa_threads, "Loader threads");

    // compose
    auto* compose_cmd = app.add_subcommand("compose", "Deal training batches over three pools");
    std::string co_source, co_augmented, co_target, co_out = "-";
    ComposeConfig co_cfg;
    compose_cmd->add_option("--source", co_source, "Source dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    compose_cmd->add_option("--augmented", co_augmented, "Augmented dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    compose_cmd->add_option("--target", co_target, "Target dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    compose_cmd->add_option("--batches", co_cfg.num_batches, "Number of batches")->required();
    compose_cmd->add_option("--batch-size", co_cfg.batch_size, "Images per batch");
    compose_cmd->add_option("--source-fraction", co_cfg.source_fraction,
                            "Share of non-target slots from the source pool");
    compose_cmd->add_option("--seed", co_cfg.seed, "Schedule seed");
    compose_cmd->add_option("--out", co_out, "Output JSONL path, or - for stdout");

    // loss-eval
    auto* loss_cmd = app.add_subcommand("loss-eval", "Alignment losses over a feature dump");
    std::string lo_features, lo_heads, lo_grads_out, lo_form = "one_minus_cos";
    int lo_grid = kDefaultPoolGrid;
    LossConfig lo_cfg;
    loss_cmd->add_option("--features", lo_features, "Feature dump path")
        ->required()
        ->check(CLI::ExistingFile);
    loss_cmd->add_option("--heads", lo_heads, "Classifier heads JSON (zero heads when absent)")
        ->check(CLI::ExistingFile);
    loss_cmd->add_option("--grid", lo_grid, "Pooling grid size");
    loss_cmd->add_option("--lambda-sim", lo_cfg.lambda_sim, "Similarity weight");
    loss_cmd->add_option("--lambda-dis", lo_cfg.lambda_dis, "Dissimilarity weight");
    loss_cmd->add_option("--lambda-cls", lo_cfg.lambda_cls, "Classification weight");
    loss_cmd->add_option("--margin", lo_cfg.margin, "Dissimilarity margin");
    loss_cmd->add_option("--similarity-form", lo_form, "one_minus_cos or raw_cos")
        ->check(CLI::IsMember({"one_minus_cos", "raw_cos"}));
    loss_cmd->add_option("--grads-out", lo_grads_out, "Write per-instance gradients here");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "Detection quality scores");
    std::string me_dets, me_gt;
    int me_threads = 1;
    metrics_cmd->add_option("--detections", me_dets, "Detections JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    metrics_cmd->add_option("--ground-truth", me_gt, "Ground-truth dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    metrics_cmd->add_option("--threads", me_threads, "Loader threads");

    // selftest
    auto* selftest_cmd = app.add_subcommand("selftest", "Built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*stats_cmd)
            return cmd_stats(st_source, st_r, st_plan, st_beta, st_cap, st_seed, st_threads);
        if (*balance_cmd) {
            ba_cfg.augment_injected_cell = !ba_no_cell_augment;
            return cmd_balance(ba_source, ba_target, ba_out, ba_cfg);
        }
        if (*sample_cmd) {
            if (!sa_kshot && !sa_random) {
                std::cerr << "sample: one of --kshot or --random is required\n";
                return 2;
            }
            return cmd_sample(sa_source, sa_out, sa_kshot, sa_random, sa_seed, sa_threads);
        }
        if (*compose_cmd)
            return cmd_compose(co_source, co_augmented, co_target, co_cfg, co_out);
        if (*loss_cmd) {
            lo_cfg.similarity_form = lo_form == "raw_cos" ? SimilarityForm::raw_cos
                                                          : SimilarityForm::one_minus_cos;
            return cmd_loss_eval(lo_features, lo_heads, lo_grid, lo_cfg, lo_form, lo_grads_out);
        }
        if (*metrics_cmd) return cmd_metrics(me_dets, me_gt, me_threads);
        if (*selftest_cmd) return run_selftest(std::cout) == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
