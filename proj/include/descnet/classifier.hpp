#pragma once

#include <cstdint>
#include <vector>

#include "descnet/layers.hpp"
#include "descnet/optim.hpp"
#include "descnet/rng.hpp"
#include "descnet/tensor.hpp"

namespace descnet {

struct LogisticConfig {
  double l2 = 1e-4;
  std::size_t steps = 500;
  double learning_rate = 0.1;
  /// Fit K independent binary (sigmoid) models instead of one softmax model.
  bool one_vs_all = false;
  /// Standardise each feature to zero mean, unit variance on the training set.
  bool standardize = true;
};

/// Linear classifier over feature rows. Scores are x W^T + b after standardisation.
struct LogisticModel {
  std::size_t classes = 0;
  std::size_t features = 0;
  std::vector<double> weights;  ///< [classes, features]
  std::vector<double> bias;     ///< [classes]
  std::vector<double> shift;    ///< per-feature mean removed before scoring
  std::vector<double> scale;    ///< per-feature 1 / std
  bool one_vs_all = false;
};

/// Full-batch gradient descent on mean cross-entropy + (l2 / 2) |W|^2.
/// Labels lie in [0, K); fewer than two distinct labels is an error.
LogisticModel train_logistic(const Tensor& features, std::span<const int> labels,
                             const LogisticConfig& cfg = {});

/// Per-class scores [N, K]: softmax probabilities, or per-class sigmoids for one-vs-all models.
Tensor64 class_scores(const LogisticModel& model, const Tensor& features);

/// Argmax of the per-class scores.
std::vector<int> classify_one_vs_all(const LogisticModel& model, const Tensor& features);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

/// Small supervised voxel classifier (two strided Conv3D + ReLU stages and a
/// fully-connected softmax head) used as the reference network for the
/// sample-quality metrics.
struct ReferenceClassifier {
  std::vector<Layer<float>> layers;
  Shape input_shape;  ///< per item, [1, D, H, W]
  std::size_t classes = 0;

  Tensor64 probabilities(const Tensor& batch) const;
  std::vector<int> predict(const Tensor& batch) const;
};

ReferenceClassifier make_reference_classifier(std::size_t grid, std::size_t classes, Rng& rng);

struct ClassifierTrainConfig {
  std::size_t iterations = 300;
  std::size_t batch_size = 20;
  AdamConfig adam{0.002, 0.9, 0.999, 1e-8};
  std::uint64_t seed = 0;
};

/// Mini-batch Adam on mean cross-entropy; returns the final mini-batch loss.
double train_reference_classifier(ReferenceClassifier& clf, const Tensor& data,
                                  std::span<const int> labels, const ClassifierTrainConfig& cfg);

}  // namespace descnet
