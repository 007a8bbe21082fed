// Python bindings for the main operations: dataset IO, balancing, feature
// pooling, alignment losses, batch composition, and detection metrics.

#include <iostream>

#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cpalign/balance.hpp"
#include "cpalign/compose.hpp"
#include "cpalign/dataset.hpp"
#include "cpalign/error.hpp"
#include "cpalign/features.hpp"
#include "cpalign/loss.hpp"
#include "cpalign/metrics.hpp"
#include "cpalign/selftest.hpp"
#include "cpalign/stats.hpp"

namespace py = pybind11;
using namespace cpalign;

namespace {

py::bytes pixels_bytes(const Image& img) {
    return py::bytes(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
}

void set_pixels(Image& img, const py::bytes& raw) {
    const std::string s = raw;
    img.pixels.assign(s.begin(), s.end());
}

}  // namespace

PYBIND11_MODULE(_cpalign, m) {
    m.doc() = "Cut-paste dataset balancing and instance alignment toolkit";

    py::register_exception<Error>(m, "Error");

    py::enum_<Domain>(m, "Domain")
        .value("source", Domain::source)
        .value("target", Domain::target)
        .value("augmented", Domain::augmented);

    py::enum_<SourceFlag>(m, "SourceFlag")
        .value("original", SourceFlag::original)
        .value("pasted", SourceFlag::pasted);

    py::class_<BBox>(m, "BBox")
        .def(py::init<>())
        .def(py::init<double, double, double, double>(), py::arg("x_min"), py::arg("y_min"),
             py::arg("x_max"), py::arg("y_max"))
        .def_readwrite("x_min", &BBox::x_min)
        .def_readwrite("y_min", &BBox::y_min)
        .def_readwrite("x_max", &BBox::x_max)
        .def_readwrite("y_max", &BBox::y_max)
        .def("valid", &BBox::valid)
        .def("area", &BBox::area)
        .def("__repr__", [](const BBox& b) {
            return "BBox(" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
                   std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + ")";
        });
    m.def("iou", &iou, py::arg("a"), py::arg("b"));

    py::class_<Image>(m, "Image")
        .def(py::init<>())
        .def(py::init<int, int, std::uint8_t>(), py::arg("width"), py::arg("height"),
             py::arg("fill") = 0)
        .def_readonly("width", &Image::width)
        .def_readonly("height", &Image::height)
        .def_property("pixels", &pixels_bytes, &set_pixels);

    py::class_<Annotation>(m, "Annotation")
        .def(py::init<>())
        .def(py::init([](int cls, const BBox& b, SourceFlag flag) {
                 return Annotation{cls, b, flag};
             }),
             py::arg("class_id"), py::arg("bbox"), py::arg("source_flag") = SourceFlag::original)
        .def_readwrite("class_id", &Annotation::class_id)
        .def_readwrite("bbox", &Annotation::bbox)
        .def_readwrite("source_flag", &Annotation::source_flag);

    py::class_<ImageRecord>(m, "ImageRecord")
        .def(py::init<>())
        .def_readwrite("image_id", &ImageRecord::image_id)
        .def_readwrite("width", &ImageRecord::width)
        .def_readwrite("height", &ImageRecord::height)
        .def_readwrite("pixels", &ImageRecord::pixels)
        .def_readwrite("annotations", &ImageRecord::annotations)
        .def_readwrite("domain", &ImageRecord::domain);

    py::class_<DetectionDataset>(m, "DetectionDataset")
        .def(py::init<>())
        .def_readwrite("classes", &DetectionDataset::classes)
        .def_readwrite("images", &DetectionDataset::images)
        .def_readwrite("domain", &DetectionDataset::domain)
        .def("num_classes", &DetectionDataset::num_classes);

    m.def("validate_dataset", &validate_dataset, py::arg("dataset"));
    m.def("load_dataset", &load_dataset, py::arg("manifest_path"), py::arg("threads") = 1);
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("out_dir"));
    m.def("sample_kshot", &sample_kshot, py::arg("dataset"), py::arg("k"), py::arg("seed"));
    m.def("sample_random_images", &sample_random_images, py::arg("dataset"), py::arg("count"),
          py::arg("seed"));

    py::class_<ClassStats>(m, "ClassStats")
        .def_readonly("r", &ClassStats::r)
        .def_readonly("per_class_count", &ClassStats::per_class_count)
        .def_readonly("sparse_images", &ClassStats::sparse_images)
        .def_readonly("dense_images", &ClassStats::dense_images)
        .def("max_count", &ClassStats::max_count);
    m.def("compute_stats", &compute_stats, py::arg("dataset"), py::arg("r") = 6);

    py::class_<PasteAssignment>(m, "PasteAssignment")
        .def_readonly("receiving_image_id", &PasteAssignment::receiving_image_id)
        .def_readonly("donor_image_id", &PasteAssignment::donor_image_id)
        .def_readonly("donor_annotation_index", &PasteAssignment::donor_annotation_index)
        .def_readonly("copies", &PasteAssignment::copies);
    py::class_<ClassIncrements>(m, "ClassIncrements")
        .def_readonly("class_id", &ClassIncrements::class_id)
        .def_readonly("requested", &ClassIncrements::requested)
        .def_readonly("total_increments", &ClassIncrements::total_increments)
        .def_readonly("assignments", &ClassIncrements::assignments);
    py::class_<IncrementPlan>(m, "IncrementPlan")
        .def_readonly("classes", &IncrementPlan::classes)
        .def("empty", &IncrementPlan::empty);
    py::class_<PlanConfig>(m, "PlanConfig")
        .def(py::init<>())
        .def_readwrite("balance_factor", &PlanConfig::balance_factor)
        .def_readwrite("cap_per_image", &PlanConfig::cap_per_image);
    m.def("compute_increment_plan", &compute_increment_plan, py::arg("stats"), py::arg("config"),
          py::arg("seed"));

    py::class_<AugmentParams>(m, "AugmentParams")
        .def(py::init<>())
        .def_readwrite("intensity_scale_lo", &AugmentParams::intensity_scale_lo)
        .def_readwrite("intensity_scale_hi", &AugmentParams::intensity_scale_hi)
        .def_readwrite("blur_sigma_lo", &AugmentParams::blur_sigma_lo)
        .def_readwrite("blur_sigma_hi", &AugmentParams::blur_sigma_hi);

    py::class_<BalanceConfig>(m, "BalanceConfig")
        .def(py::init<>())
        .def_readwrite("r", &BalanceConfig::r)
        .def_readwrite("balance_factor", &BalanceConfig::balance_factor)
        .def_readwrite("cap_per_image", &BalanceConfig::cap_per_image)
        .def_readwrite("stride", &BalanceConfig::stride)
        .def_readwrite("augment", &BalanceConfig::augment)
        .def_readwrite("augment_injected_cell", &BalanceConfig::augment_injected_cell)
        .def_readwrite("max_inject_tries", &BalanceConfig::max_inject_tries)
        .def_readwrite("min_increment_fraction", &BalanceConfig::min_increment_fraction)
        .def_readwrite("seed", &BalanceConfig::seed)
        .def_readwrite("threads", &BalanceConfig::threads);

    py::class_<ClassBalanceRow>(m, "ClassBalanceRow")
        .def_readonly("class_id", &ClassBalanceRow::class_id)
        .def_readonly("class_name", &ClassBalanceRow::class_name)
        .def_readonly("before", &ClassBalanceRow::before)
        .def_readonly("requested", &ClassBalanceRow::requested)
        .def_readonly("planned", &ClassBalanceRow::planned)
        .def_readonly("achieved", &ClassBalanceRow::achieved)
        .def_readonly("after", &ClassBalanceRow::after);
    py::class_<BalanceReport>(m, "BalanceReport")
        .def_readonly("per_class", &BalanceReport::per_class)
        .def_readonly("sparse_count", &BalanceReport::sparse_count)
        .def_readonly("paste_failures", &BalanceReport::paste_failures)
        .def_readonly("injection_failures", &BalanceReport::injection_failures)
        .def_readonly("injected_cells", &BalanceReport::injected_cells)
        .def("to_json",
             [](const BalanceReport& r, int indent) { return to_json(r, indent); },
             py::arg("indent") = 2);
    py::class_<BalanceResult>(m, "BalanceResult")
        .def_readonly("dataset", &BalanceResult::dataset)
        .def_readonly("report", &BalanceResult::report);
    m.def("balance_dataset", &balance_dataset, py::arg("source"), py::arg("target"),
          py::arg("config") = BalanceConfig{});

    py::class_<FeatureMap>(m, "FeatureMap")
        .def(py::init<>())
        .def(py::init<int, int, int>(), py::arg("channels"), py::arg("height"), py::arg("width"))
        .def_readonly("channels", &FeatureMap::channels)
        .def_readonly("height", &FeatureMap::height)
        .def_readonly("width", &FeatureMap::width)
        .def_readwrite("data", &FeatureMap::data)
        .def("at",
             [](const FeatureMap& fm, int c, int y, int x) { return fm.at(c, y, x); },
             py::arg("c"), py::arg("y"), py::arg("x"));

    py::class_<InstanceLabel>(m, "InstanceLabel")
        .def(py::init<>())
        .def(py::init([](int cls, const BBox& b, Domain d) {
                 return InstanceLabel{cls, b, d};
             }),
             py::arg("class_id"), py::arg("bbox"), py::arg("domain") = Domain::source)
        .def_readwrite("class_id", &InstanceLabel::class_id)
        .def_readwrite("bbox", &InstanceLabel::bbox)
        .def_readwrite("domain", &InstanceLabel::domain);

    py::class_<MultiLevelFeatures>(m, "MultiLevelFeatures")
        .def(py::init<>())
        .def_readwrite("image_id", &MultiLevelFeatures::image_id)
        .def_readwrite("image_w", &MultiLevelFeatures::image_w)
        .def_readwrite("image_h", &MultiLevelFeatures::image_h)
        .def_readwrite("levels", &MultiLevelFeatures::levels)
        .def_readwrite("gt", &MultiLevelFeatures::gt)
        .def("validate", &MultiLevelFeatures::validate);

    m.def("write_feature_dump", &write_feature_dump, py::arg("path"), py::arg("records"));
    m.def("read_feature_dump", &read_feature_dump, py::arg("path"));
    m.def("upsample_level", &upsample_level, py::arg("level"), py::arg("size"));
    m.def("pool_instances", &pool_instances, py::arg("record"),
          py::arg("grid_size") = kDefaultPoolGrid);

    py::class_<InstanceFeature>(m, "InstanceFeature")
        .def(py::init<>())
        .def_readwrite("image_id", &InstanceFeature::image_id)
        .def_readwrite("instance_index", &InstanceFeature::instance_index)
        .def_readwrite("class_id", &InstanceFeature::class_id)
        .def_readwrite("domain", &InstanceFeature::domain)
        .def_readwrite("level", &InstanceFeature::level)
        .def_readwrite("vector", &InstanceFeature::vector);

    py::enum_<SimilarityForm>(m, "SimilarityForm")
        .value("one_minus_cos", SimilarityForm::one_minus_cos)
        .value("raw_cos", SimilarityForm::raw_cos);

    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("lambda_sim", &LossConfig::lambda_sim)
        .def_readwrite("lambda_dis", &LossConfig::lambda_dis)
        .def_readwrite("lambda_cls", &LossConfig::lambda_cls)
        .def_readwrite("margin", &LossConfig::margin)
        .def_readwrite("similarity_form", &LossConfig::similarity_form);

    py::class_<ClassifierHead>(m, "ClassifierHead")
        .def(py::init<>())
        .def_static("zeros", &ClassifierHead::zeros, py::arg("num_classes"), py::arg("dim"))
        .def_readwrite("num_classes", &ClassifierHead::num_classes)
        .def_readwrite("dim", &ClassifierHead::dim)
        .def_readwrite("weights", &ClassifierHead::weights)
        .def_readwrite("bias", &ClassifierHead::bias);

    py::class_<HeadGradient>(m, "HeadGradient")
        .def_readonly("weights", &HeadGradient::weights)
        .def_readonly("bias", &HeadGradient::bias);

    py::class_<SingleLossResult>(m, "SingleLossResult")
        .def_readonly("value", &SingleLossResult::value)
        .def_readonly("grads", &SingleLossResult::grads);
    py::class_<ClassificationLossResult>(m, "ClassificationLossResult")
        .def_readonly("value", &ClassificationLossResult::value)
        .def_readonly("grads", &ClassificationLossResult::grads)
        .def_readonly("head_grad", &ClassificationLossResult::head_grad);

    m.def("similarity_loss", &similarity_loss, py::arg("instances"),
          py::arg("form") = SimilarityForm::one_minus_cos);
    m.def("dissimilarity_loss", &dissimilarity_loss, py::arg("instances"),
          py::arg("margin") = 0.3);
    m.def("classification_loss", &classification_loss, py::arg("instances"), py::arg("head"));

    py::class_<LevelLosses>(m, "LevelLosses")
        .def_readonly("similarity", &LevelLosses::similarity)
        .def_readonly("dissimilarity", &LevelLosses::dissimilarity)
        .def_readonly("classification", &LevelLosses::classification);
    py::class_<MultiLevelLossResult>(m, "MultiLevelLossResult")
        .def_readonly("per_level", &MultiLevelLossResult::per_level)
        .def_readonly("similarity", &MultiLevelLossResult::similarity)
        .def_readonly("dissimilarity", &MultiLevelLossResult::dissimilarity)
        .def_readonly("classification", &MultiLevelLossResult::classification)
        .def_readonly("total", &MultiLevelLossResult::total)
        .def_readonly("grads", &MultiLevelLossResult::grads)
        .def_readonly("head_grads", &MultiLevelLossResult::head_grads)
        .def("to_json",
             [](const MultiLevelLossResult& r, int indent) { return to_json(r, indent); },
             py::arg("indent") = 2);
    py::class_<BatchLossResult>(m, "BatchLossResult")
        .def_readonly("result", &BatchLossResult::result)
        .def_readonly("instances", &BatchLossResult::instances);

    m.def("i2da_loss", &i2da_loss, py::arg("levels"), py::arg("heads"),
          py::arg("config") = LossConfig{});
    m.def("i2da_loss_on_batch", &i2da_loss_on_batch, py::arg("batch"), py::arg("heads"),
          py::arg("config") = LossConfig{}, py::arg("grid_size") = kDefaultPoolGrid);

    py::class_<ComposeConfig>(m, "ComposeConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &ComposeConfig::batch_size)
        .def_readwrite("num_batches", &ComposeConfig::num_batches)
        .def_readwrite("source_fraction", &ComposeConfig::source_fraction)
        .def_readwrite("seed", &ComposeConfig::seed);
    py::class_<ScheduleSlot>(m, "ScheduleSlot")
        .def_readonly("pool", &ScheduleSlot::pool)
        .def_readonly("image_id", &ScheduleSlot::image_id);
    py::class_<BatchSchedule>(m, "BatchSchedule")
        .def_readonly("batch_size", &BatchSchedule::batch_size)
        .def_readonly("batches", &BatchSchedule::batches)
        .def("to_jsonl", [](const BatchSchedule& s) { return to_jsonl(s); });
    m.def("compose_schedule", &compose_schedule, py::arg("source_ids"), py::arg("augmented_ids"),
          py::arg("target_ids"), py::arg("config") = ComposeConfig{});

    py::class_<Detection>(m, "Detection")
        .def(py::init<>())
        .def(py::init([](const std::string& image_id, int cls, const BBox& b, double conf) {
                 return Detection{image_id, cls, b, conf};
             }),
             py::arg("image_id"), py::arg("class_id"), py::arg("bbox"), py::arg("confidence"))
        .def_readwrite("image_id", &Detection::image_id)
        .def_readwrite("class_id", &Detection::class_id)
        .def_readwrite("bbox", &Detection::bbox)
        .def_readwrite("confidence", &Detection::confidence);
    py::class_<GroundTruthBox>(m, "GroundTruthBox")
        .def(py::init<>())
        .def(py::init([](const std::string& image_id, int cls, const BBox& b) {
                 return GroundTruthBox{image_id, cls, b};
             }),
             py::arg("image_id"), py::arg("class_id"), py::arg("bbox"))
        .def_readwrite("image_id", &GroundTruthBox::image_id)
        .def_readwrite("class_id", &GroundTruthBox::class_id)
        .def_readwrite("bbox", &GroundTruthBox::bbox);
    py::class_<ClassMetrics>(m, "ClassMetrics")
        .def_readonly("class_id", &ClassMetrics::class_id)
        .def_readonly("ap50", &ClassMetrics::ap50)
        .def_readonly("gt_count", &ClassMetrics::gt_count)
        .def_readonly("det_count", &ClassMetrics::det_count);
    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("per_class", &MetricsReport::per_class)
        .def_readonly("map50", &MetricsReport::map50)
        .def_readonly("map50_95", &MetricsReport::map50_95)
        .def_readonly("recall50", &MetricsReport::recall50)
        .def("to_json",
             [](const MetricsReport& r, int indent) { return to_json(r, indent); },
             py::arg("indent") = 2);
    m.def("average_precision", &average_precision, py::arg("detections"), py::arg("ground_truth"),
          py::arg("iou_threshold"));
    m.def("map_suite", &map_suite, py::arg("detections"), py::arg("ground_truth"));

    m.def("run_selftest", [] {
        py::scoped_ostream_redirect redirect;
        return run_selftest(std::cout);
    });
}
