#include "descnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <numeric>
#include <stdexcept>

namespace descnet {

double recovery_error(const VoxelGrid& original, const VoxelGrid& recovered,
                      const CorruptionMask& mask) {
  if (original.dims != recovered.dims) throw ShapeError("recovery_error: grid dimensions differ");
  if (mask.size() != original.size()) throw ShapeError("recovery_error: mask size differs from grid");
  std::size_t count = 0, wrong = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.cells[i]) continue;
    ++count;
    if (original.occupancy[i] != recovered.occupancy[i]) ++wrong;
  }
  if (count == 0) throw std::invalid_argument("recovery_error: mask marks no voxels");
  return static_cast<double>(wrong) / static_cast<double>(count);
}

void check_distribution_rows(const Tensor64& probs) {
  if (probs.empty() || probs.rank() != 2) throw ShapeError("class probabilities must be [N, K]");
  const std::size_t K = probs.dim(1);
  for (std::size_t n = 0; n < probs.dim(0); ++n) {
    double sum = 0;
    for (std::size_t c = 0; c < K; ++c) {
      const double p = probs[n * K + c];
      if (!(p >= 0) || !std::isfinite(p)) {
        throw std::invalid_argument("classifier output row " + std::to_string(n) +
                                    " has a negative or non-finite entry");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("classifier output row " + std::to_string(n) +
                                  " does not sum to 1");
    }
  }
}

double inception_score(const Tensor64& probs) {
  check_distribution_rows(probs);
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  std::vector<double> marginal(K, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < K; ++c) marginal[c] += probs[n * K + c];
  }
  for (auto& m : marginal) m /= static_cast<double>(N);
  double kl_sum = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < K; ++c) {
      const double p = probs[n * K + c];
      if (p > 0) kl_sum += p * (std::log(p) - std::log(marginal[c]));
    }
  }
  return std::exp(kl_sum / static_cast<double>(N));
}

double avg_softmax_prob(const Tensor64& probs, std::size_t category) {
  check_distribution_rows(probs);
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  if (category >= K) throw std::out_of_range("category index exceeds class count");
  double acc = 0;
  for (std::size_t n = 0; n < N; ++n) acc += probs[n * K + category];
  return acc / static_cast<double>(N);
}

std::vector<std::size_t> nearest_neighbor(std::span<const float> query, const Tensor& trainset,
                                          std::size_t k) {
  if (trainset.empty()) throw std::invalid_argument("nearest_neighbor: empty training set");
  if (query.size() != trainset.item_size()) {
    throw ShapeError("nearest_neighbor: query size differs from training items");
  }
  const std::size_t M = trainset.batch();
  k = std::min(k, M);
  std::vector<double> dist(M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto item = trainset.item(m);
    double d = 0;
    for (std::size_t j = 0; j < item.size(); ++j) {
      const double r = static_cast<double>(item[j]) - query[j];
      d += r * r;
    }
    dist[m] = d;
  }
  std::vector<std::size_t> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  order.resize(k);
  return order;
}

namespace {

/// Indices of the layers whose outputs are the post-ReLU maps of the first two convolutions.
std::pair<std::size_t, std::size_t> feature_taps(const DescriptorNet<float>& net) {
  std::vector<std::size_t> taps;
  const auto& L = net.layers;
  for (std::size_t i = 0; i + 1 < L.size() && taps.size() < 2; ++i) {
    if (L[i].kind == LayerKind::Conv3D && L[i + 1].kind == LayerKind::ReLU) taps.push_back(i + 2);
  }
  if (taps.size() < 2) {
    throw ShapeError("feature extraction needs a descriptor with two Conv3D + ReLU stages");
  }
  return {taps[0], taps[1]};
}

}  // namespace

Tensor extract_features(const DescriptorNet<float>& net, const Tensor& batch, FeatureConfig cfg) {
  const auto [t1, t2] = feature_taps(net);
  if (batch.empty()) throw ShapeError("feature extraction on an empty batch");
  require_same_shape(batch.shape(), net.batch_shape(batch.dim(0)), "feature input");
  const auto trace = forward_trace(net.layers, batch, Mode::Infer);
  const Tensor p1 = maxpool3d(trace.values[t1], {cfg.pool1, cfg.pool1, cfg.pool1});
  const Tensor p2 = maxpool3d(trace.values[t2], {cfg.pool2, cfg.pool2, cfg.pool2});
  const std::size_t N = batch.dim(0);
  const std::size_t f1 = p1.item_size(), f2 = p2.item_size();
  Tensor out({N, f1 + f2});
  for (std::size_t n = 0; n < N; ++n) {
    auto dst = out.item(n);
    std::copy(p1.item(n).begin(), p1.item(n).end(), dst.begin());
    std::copy(p2.item(n).begin(), p2.item(n).end(), dst.begin() + static_cast<std::ptrdiff_t>(f1));
  }
  return out;
}

std::size_t feature_length(const DescriptorNet<float>& net, FeatureConfig cfg) {
  const auto [t1, t2] = feature_taps(net);
  std::vector<Shape> shapes{net.batch_shape(1)};
  for (const auto& l : net.layers) shapes.push_back(output_shape(l, shapes.back()));
  auto pooled = [](const Shape& s, int w) {
    std::size_t n = s[1];
    for (std::size_t a = 2; a < 5; ++a) n *= (s[a] + static_cast<std::size_t>(w) - 1) / static_cast<std::size_t>(w);
    return n;
  };
  return pooled(shapes[t1], cfg.pool1) + pooled(shapes[t2], cfg.pool2);
}

std::string to_json_line(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["metric"] = r.metric;
  j["category"] = r.category;
  j["value"] = r.value;
  j["stddev"] = r.stddev;
  j["count"] = r.count;
  return j.dump();
}

}  // namespace descnet
