#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descnet/networks.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

/// Mean |original - recovered| over the corrupted (mask-true) voxels of two
/// binary grids.
double recovery_error(const VoxelGrid& original, const VoxelGrid& recovered,
                      const CorruptionMask& mask);

/// Rows of `probs` ([N, K]) are class conditionals p(c | Y_i).
/// exp(mean_i KL(p(c | Y_i) || p(c))) with p(c) the mean conditional.
double inception_score(const Tensor64& probs);

/// Mean of p(category | Y_i) over the rows of `probs`.
double avg_softmax_prob(const Tensor64& probs, std::size_t category);

/// Throws unless every row is a probability vector (nonnegative, sums to 1 within 1e-6).
void check_distribution_rows(const Tensor64& probs);

/// Indices of the k training items nearest to `query` in l2 distance over
/// voxels, closest first (ties keep training order).
std::vector<std::size_t> nearest_neighbor(std::span<const float> query, const Tensor& trainset,
                                          std::size_t k);

struct FeatureConfig {
  /// Max-pool windows applied to the post-ReLU maps of the first and second conv layers.
  int pool1 = 4;
  int pool2 = 2;
};

/// Concatenated max-pooled responses of the first two conv layers, one row per item: [N, F].
Tensor extract_features(const DescriptorNet<float>& net, const Tensor& batch,
                        FeatureConfig cfg = {});

/// Feature length for an input of `item_shape` ([C, D, H, W]).
std::size_t feature_length(const DescriptorNet<float>& net, FeatureConfig cfg = {});

/// One row of a metric report, serialized as a JSON object line.
struct MetricRecord {
  std::string metric;    ///< e.g. "inception_score", "avg_softmax_prob", "recovery_error"
  std::string category;  ///< class / dataset name, may be empty
  double value = 0;
  double stddev = 0;
  std::size_t count = 0;
};

std::string to_json_line(const MetricRecord& record);

}  // namespace descnet
