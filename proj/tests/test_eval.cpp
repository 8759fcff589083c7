#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "descnet/classifier.hpp"
#include "descnet/eval.hpp"
#include "descnet/obj_export.hpp"
#include "descnet/presets.hpp"
#include "support.hpp"

using namespace descnet;

namespace {

Tensor64 rows(std::size_t k, const std::vector<std::vector<double>>& r) {
  Tensor64 t({r.size(), k});
  for (std::size_t i = 0; i < r.size(); ++i) std::copy(r[i].begin(), r[i].end(), t.data() + i * k);
  return t;
}

/// Exhaustive oracle: exp(mean_i sum_c p_ic log(p_ic / mean_j p_jc)).
double inception_oracle(const std::vector<std::vector<double>>& p) {
  const std::size_t K = p[0].size();
  std::vector<double> marginal(K, 0.0);
  for (const auto& r : p) {
    for (std::size_t c = 0; c < K; ++c) marginal[c] += r[c] / static_cast<double>(p.size());
  }
  double kl = 0;
  for (const auto& r : p) {
    for (std::size_t c = 0; c < K; ++c) {
      if (r[c] > 0) kl += r[c] * std::log(r[c] / marginal[c]);
    }
  }
  return std::exp(kl / static_cast<double>(p.size()));
}

VoxelGrid grid_from(const std::vector<int>& cells, Dims3 d = {2, 2, 2}) {
  VoxelGrid g(d);
  for (std::size_t i = 0; i < cells.size(); ++i) g.occupancy[i] = static_cast<std::uint8_t>(cells[i]);
  return g;
}

CorruptionMask mask_from(const std::vector<int>& cells) {
  CorruptionMask m;
  for (int c : cells) m.cells.push_back(static_cast<std::uint8_t>(c));
  return m;
}

}  // namespace

TEST(InceptionScore, IdenticalConditionalsScoreOne) {
  EXPECT_NEAR(inception_score(rows(3, {{0.2, 0.5, 0.3}, {0.2, 0.5, 0.3}, {0.2, 0.5, 0.3}})), 1.0, 1e-12);
}

TEST(InceptionScore, EvenConfidentSplitScoresK) {
  for (std::size_t K : {2u, 5u, 10u}) {
    std::vector<std::vector<double>> p;
    for (std::size_t i = 0; i < 3 * K; ++i) {
      std::vector<double> r(K, 0.0);
      r[i % K] = 1.0;
      p.push_back(r);
    }
    EXPECT_NEAR(inception_score(rows(K, p)), static_cast<double>(K), 1e-9);
  }
}

TEST(InceptionScore, MixedTwoClassCase) {
  const double expected = std::exp(0.9 * std::log(1.8) + 0.1 * std::log(0.2));
  EXPECT_NEAR(inception_score(rows(2, {{0.9, 0.1}, {0.1, 0.9}})), expected, 1e-12);
}

TEST(InceptionScore, RandomRowsMatchOracleAndStayInRange) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t K = 2 + rng.below(6), N = 1 + rng.below(12);
    std::vector<std::vector<double>> p(N, std::vector<double>(K));
    for (auto& r : p) {
      double total = 0;
      for (auto& v : r) total += (v = rng.uniform() * rng.uniform());
      for (auto& v : r) v /= total;
    }
    const double is = inception_score(rows(K, p));
    EXPECT_NEAR(is, inception_oracle(p), 1e-10);
    EXPECT_GE(is, 1.0 - 1e-12);
    EXPECT_LE(is, static_cast<double>(K) + 1e-12);
  }
}

TEST(InceptionScore, RejectsNonDistributions) {
  EXPECT_THROW(inception_score(rows(2, {{0.5, 0.6}})), std::invalid_argument);
  EXPECT_THROW(inception_score(rows(2, {{1.2, -0.2}})), std::invalid_argument);
  EXPECT_THROW(inception_score(Tensor64({0, 2})), std::invalid_argument);
}

TEST(AvgSoftmaxProb, Examples) {
  EXPECT_EQ(avg_softmax_prob(rows(3, {{0, 1, 0}, {0, 1, 0}}), 1), 1.0);
  EXPECT_NEAR(avg_softmax_prob(rows(4, {{0.25, 0.25, 0.25, 0.25}}), 2), 0.25, 1e-15);
  EXPECT_THROW(avg_softmax_prob(rows(2, {{0.5, 0.5}}), 2), std::out_of_range);
}

TEST(RecoveryError, TrivialCases) {
  const auto a = grid_from({1, 0, 1, 0, 1, 1, 0, 0});
  const auto flipped = grid_from({0, 1, 0, 1, 0, 0, 1, 1});
  const auto all = mask_from({1, 1, 1, 1, 1, 1, 1, 1});
  EXPECT_EQ(recovery_error(a, a, all), 0.0);
  EXPECT_EQ(recovery_error(a, flipped, all), 1.0);
  const auto half = grid_from({0, 1, 0, 1, 1, 1, 0, 0});
  EXPECT_EQ(recovery_error(a, half, all), 0.5);
  EXPECT_THROW(recovery_error(a, a, mask_from({0, 0, 0, 0, 0, 0, 0, 0})), std::invalid_argument);
}

TEST(RecoveryError, SymmetricAndBlindToUnmaskedCells) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    VoxelGrid a({3, 3, 3}), b({3, 3, 3}), c({3, 3, 3});
    CorruptionMask m;
    m.cells.resize(27);
    for (std::size_t i = 0; i < 27; ++i) {
      a.occupancy[i] = rng.uniform() < 0.5;
      b.occupancy[i] = rng.uniform() < 0.5;
      m.cells[i] = rng.uniform() < 0.6;
    }
    m.cells[0] = 1;
    c = b;
    for (std::size_t i = 0; i < 27; ++i) {
      if (!m.cells[i]) c.occupancy[i] ^= 1;
    }
    EXPECT_EQ(recovery_error(a, b, m), recovery_error(b, a, m));
    EXPECT_EQ(recovery_error(a, b, m), recovery_error(a, c, m));
  }
}

TEST(NearestNeighbor, MatchesExhaustiveScan) {
  Rng rng(3);
  const auto train = support::random_tensor<float>({10, 1, 3, 3, 3}, rng);
  const auto query = support::random_tensor<float>({1, 1, 3, 3, 3}, rng);
  std::vector<std::pair<double, std::size_t>> oracle;
  for (std::size_t n = 0; n < 10; ++n) {
    double d = 0;
    for (std::size_t i = 0; i < 27; ++i) {
      const double diff = static_cast<double>(train[n * 27 + i]) - query[i];
      d += diff * diff;
    }
    oracle.emplace_back(d, n);
  }
  std::sort(oracle.begin(), oracle.end());
  const auto got = nearest_neighbor(query.span(), train, 10);
  ASSERT_EQ(got.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(got[i], oracle[i].second);
  EXPECT_EQ(nearest_neighbor(query.span(), train, 3).size(), 3u);
}

TEST(NearestNeighbor, MemberFindsItself) {
  Rng rng(4);
  const auto train = support::random_tensor<float>({6, 1, 2, 2, 2}, rng);
  for (std::size_t n = 0; n < 6; ++n) EXPECT_EQ(nearest_neighbor(train.item(n), train, 1)[0], n);
}

TEST(Features, SynthesisPresetGivesEightThousandOneHundred) {
  auto net = build_descriptor<float>(descriptor_architecture(PresetName::Synthesis3, 32));
  EXPECT_EQ(feature_length(net), 8100u);
  Rng rng(5);
  init_descriptor(net, rng);
  const auto batch = support::random_tensor<float>(net.batch_shape(1), rng);
  EXPECT_EQ(extract_features(net, batch).shape(), (Shape{1, 8100}));
}

TEST(Features, ZeroInputZeroBiasGivesZeros) {
  auto net = build_descriptor<float>(descriptor_architecture(PresetName::Synthesis3, 16));
  Rng rng(6);
  init_descriptor(net, rng);
  for (auto& l : net.layers) l.bias.fill(0.0f);
  const auto f = extract_features(net, Tensor(net.batch_shape(2)));
  for (float v : f.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Features, BatchPermutationPermutesRows) {
  Rng rng(7);
  auto net = build_descriptor<float>(descriptor_architecture(PresetName::Synthesis3, 16));
  init_descriptor(net, rng);
  const auto batch = support::random_tensor<float>(net.batch_shape(3), rng);
  Tensor swapped(batch.shape());
  const std::size_t order[] = {2, 0, 1};
  for (std::size_t n = 0; n < 3; ++n) swapped.set_item(n, batch.item(order[n]));
  const auto f = extract_features(net, batch);
  const auto g = extract_features(net, swapped);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_TRUE(bit_identical(g.item_tensor(n), f.item_tensor(order[n])));
  }
}

TEST(Features, RejectsStacksWithoutTwoConvLayers) {
  Rng rng(8);
  auto net = support::tiny_descriptor<float>(rng, 5);
  EXPECT_THROW(feature_length(net), std::invalid_argument);
}

TEST(Logistic, SeparableToyReachesFullTrainAccuracy) {
  Rng rng(9);
  Tensor x({40, 3});
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = static_cast<int>(i % 2);
    x[i * 3] = static_cast<float>((y[i] ? 2.0 : -2.0) + 0.5 * rng.normal());
    x[i * 3 + 1] = static_cast<float>(rng.normal());
    x[i * 3 + 2] = static_cast<float>(rng.normal());
  }
  for (bool ova : {false, true}) {
    LogisticConfig cfg;
    cfg.one_vs_all = ova;
    const auto model = train_logistic(x, y, cfg);
    EXPECT_EQ(accuracy(classify_one_vs_all(model, x), y), 1.0);
  }
}

TEST(Logistic, ConflictingDuplicatesBoundedByMajorityRate) {
  Tensor x({10, 1});
  std::vector<int> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    x[i] = 1.0f;
    y[i] = i < 7 ? 0 : 1;
  }
  const auto model = train_logistic(x, y);
  EXPECT_LE(accuracy(classify_one_vs_all(model, x), y), 0.7);
}

TEST(Logistic, SoftmaxRowsSumToOneAndSingleClassRejected) {
  Rng rng(10);
  const auto x = support::random_tensor<float>({12, 4}, rng);
  std::vector<int> y(12);
  for (std::size_t i = 0; i < 12; ++i) y[i] = static_cast<int>(i % 3);
  const auto probs = class_scores(train_logistic(x, y), x);
  for (std::size_t n = 0; n < 12; ++n) {
    double s = 0;
    for (std::size_t c = 0; c < 3; ++c) s += probs[n * 3 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  std::vector<int> one(12, 1);
  EXPECT_THROW(train_logistic(x, one), std::invalid_argument);
}

TEST(ReferenceClassifier, OutputsAreDistributionsAndTrainingFits) {
  Rng rng(11);
  auto clf = make_reference_classifier(8, 2, rng);
  Tensor data({16, 1, 8, 8, 8});
  std::vector<int> labels(16);
  for (std::size_t n = 0; n < 16; ++n) {
    labels[n] = static_cast<int>(n % 2);
    for (std::size_t i = 0; i < 512; ++i) {
      const std::size_t z = i / 64;
      data[n * 512 + i] = ((labels[n] == 0) == (z < 4)) ? 0.5f : -0.5f;
    }
  }
  const auto before = clf.probabilities(data);
  check_distribution_rows(before);
  ClassifierTrainConfig cfg;
  cfg.iterations = 60;
  cfg.batch_size = 8;
  train_reference_classifier(clf, data, labels, cfg);
  EXPECT_EQ(accuracy(clf.predict(data), labels), 1.0);
}

TEST(ObjExport, SingleVoxelCube) {
  VoxelGrid g({3, 3, 3});
  g.set(1, 1, 1, true);
  ObjStats stats;
  const auto text = voxels_to_obj(g, &stats);
  EXPECT_EQ(stats.vertices, 8u);
  EXPECT_EQ(stats.triangles, 12u);
  std::istringstream in(text);
  std::string line;
  std::size_t v = 0, f = 0;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  EXPECT_EQ(v, 8u);
  EXPECT_EQ(f, 12u);
}

TEST(ObjExport, AdjacentVoxelsShareFaceAndVertices) {
  VoxelGrid g({1, 1, 2});
  g.set(0, 0, 0, true);
  g.set(0, 0, 1, true);
  ObjStats stats;
  voxels_to_obj(g, &stats);
  EXPECT_EQ(stats.vertices, 12u);
  EXPECT_EQ(stats.triangles, 20u);
  VoxelGrid empty({2, 2, 2});
  voxels_to_obj(empty, &stats);
  EXPECT_EQ(stats.vertices, 0u);
  EXPECT_EQ(stats.triangles, 0u);
}

TEST(MetricRecord, JsonLine) {
  EXPECT_EQ(to_json_line(MetricRecord{"recovery_error", "cuboid", 0.25, 0.0, 20}),
            R"({"metric":"recovery_error","category":"cuboid","value":0.25,"stddev":0.0,"count":20})");
}
