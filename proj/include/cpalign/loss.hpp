#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpalign/features.hpp"

namespace cpalign {

/// Intra-class pair score. one_minus_cos drives same-class vectors together
/// when minimized; raw_cos keeps the plain cosine sum for comparison runs.
enum class SimilarityForm { one_minus_cos, raw_cos };

struct LossConfig {
    double lambda_sim = 0.005;
    double lambda_dis = 0.005;
    double lambda_cls = 0.001;
    double margin = 0.3;  // inter-class cosine hinge
    SimilarityForm similarity_form = SimilarityForm::one_minus_cos;

    void validate() const;
};

/// Linear classification head for one pyramid level.
struct ClassifierHead {
    int num_classes = 0;
    int dim = 0;
    std::vector<double> weights;  // [num_classes][dim], row-major
    std::vector<double> bias;     // [num_classes]

    static ClassifierHead zeros(int num_classes, int dim);
    void validate() const;
    double w(int cls, int d) const { return weights[static_cast<std::size_t>(cls) * dim + d]; }
};

struct HeadGradient {
    std::vector<double> weights;  // same layout as ClassifierHead::weights
    std::vector<double> bias;
};

/// Loss value plus d(value)/d(instance vector), aligned with the input order.
struct SingleLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grads;
};

struct ClassificationLossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grads;
    HeadGradient head_grad;
};

/// Mean pairwise score inside each class, summed over classes. Classes with
/// fewer than two instances contribute nothing. Summation follows a canonical
/// content order, so any permutation of `instances` yields bitwise-identical
/// values and per-instance gradients.
SingleLossResult similarity_loss(const std::vector<InstanceFeature>& instances,
                                 SimilarityForm form);

/// Hinge on the cosine between class-mean vectors, summed over class pairs.
/// Pairs at or below the margin contribute nothing (zero subgradient at the
/// boundary).
SingleLossResult dissimilarity_loss(const std::vector<InstanceFeature>& instances, double margin);

/// Softmax cross-entropy under the linear head, averaged within each class
/// and summed over classes.
ClassificationLossResult classification_loss(const std::vector<InstanceFeature>& instances,
                                             const ClassifierHead& head);

struct LevelLosses {
    double similarity = 0.0;
    double dissimilarity = 0.0;
    double classification = 0.0;
};

struct MultiLevelLossResult {
    std::array<LevelLosses, kNumFeatureLevels> per_level{};
    double similarity = 0.0;      // level averages
    double dissimilarity = 0.0;
    double classification = 0.0;
    double total = 0.0;           // weighted combination of the averages
    // d(total)/d(vector), per level, aligned with that level's input order
    std::array<std::vector<std::vector<double>>, kNumFeatureLevels> grads;
    std::array<HeadGradient, kNumFeatureLevels> head_grads;  // d(total)/d(head)
};

/// Evaluate all three losses on per-level instance sets with one head per
/// level, average over levels, and combine with the configured weights.
MultiLevelLossResult
i2da_loss(const std::array<std::vector<InstanceFeature>, kNumFeatureLevels>& levels,
          const std::array<ClassifierHead, kNumFeatureLevels>& heads, const LossConfig& cfg);

/// Pool every record, split the instances by level, and evaluate.
struct BatchLossResult {
    MultiLevelLossResult result;
    std::array<std::vector<InstanceFeature>, kNumFeatureLevels> instances;
};

BatchLossResult i2da_loss_on_batch(const std::vector<MultiLevelFeatures>& batch,
                                   const std::array<ClassifierHead, kNumFeatureLevels>& heads,
                                   const LossConfig& cfg, int grid_size = kDefaultPoolGrid);

std::string to_json(const MultiLevelLossResult& result, int indent = 2);

}  // namespace cpalign
