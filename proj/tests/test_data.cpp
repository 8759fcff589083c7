#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "descnet/resample.hpp"
#include "descnet/synthetic.hpp"
#include "descnet/voxel_grid.hpp"
#include "support.hpp"

using namespace descnet;

namespace {

VoxelGrid random_grid(Dims3 dims, Rng& rng, double p = 0.4) {
  VoxelGrid g(dims);
  for (auto& c : g.occupancy) c = rng.uniform() < p ? 1 : 0;
  return g;
}

}  // namespace

TEST(Preprocessing, CenterAndUncenter) {
  Rng rng(1);
  const auto g = random_grid({4, 4, 4}, rng);
  const float mean = 0.37f;
  const auto back = uncenter(center(g, mean), mean);
  EXPECT_EQ(back, to_tensor(g));
  const auto zero = center(VoxelGrid({2, 2, 2}), 0.25f);
  for (float v : zero.values()) EXPECT_EQ(v, -0.25f);

  VoxelGrid ones({2, 2, 2});
  std::fill(ones.occupancy.begin(), ones.occupancy.end(), 1);
  const std::vector<VoxelGrid> pair{ones, VoxelGrid({2, 2, 2})};
  EXPECT_FLOAT_EQ(dataset_mean(pair), 0.5f);
}

TEST(Preprocessing, ScaledRangeIsExactlyInvertible) {
  Rng rng(2);
  const auto g = random_grid({3, 4, 5}, rng);
  const auto s = scale_pm1(g);
  for (float v : s.values()) EXPECT_TRUE(v == -1.0f || v == 1.0f);
  EXPECT_EQ(unscale_pm1(s), to_tensor(g));
  auto tagged = g;
  tagged.preprocessing = {Preprocessing::ScaledPm1, 0};
  EXPECT_EQ(unpreprocess(preprocess(tagged), tagged.preprocessing), to_tensor(g));
}

TEST(Binarize, ThresholdAndTie) {
  const float eps = 1e-6f;
  Tensor t({1, 1, 1, 1, 3}, std::vector<float>{0.5f - eps, 0.5f, 0.5f + eps});
  const auto g = binarize(t);
  EXPECT_EQ(g.occupancy, (std::vector<std::uint8_t>{0, 1, 1}));
  Rng rng(3);
  const auto r = random_grid({4, 4, 4}, rng);
  EXPECT_EQ(binarize(to_tensor(r)).occupancy, r.occupancy);

  const auto noisy = support::random_tensor<float>({1, 1, 4, 4, 4}, rng);
  for (auto c : binarize(uncenter(noisy, 0.3f)).occupancy) EXPECT_LE(c, 1);
}

TEST(Corrupt, FractionsAndMaskCardinality) {
  Rng rng(4);
  const auto item = to_tensor(random_grid({32, 32, 32}, rng));
  const auto c = corrupt(item, 0.7, rng, {});
  EXPECT_EQ(c.mask.count(), 22938u);
  for (std::size_t i = 0; i < item.size(); ++i) {
    if (!c.mask.cells[i]) {
      EXPECT_EQ(std::memcmp(&c.values[i], &item[i], sizeof(float)), 0);
    }
  }
  const auto none = corrupt(item, 0.0, rng, {});
  EXPECT_FALSE(none.mask.any());
  EXPECT_TRUE(bit_identical(none.values, item));
  const auto all = corrupt(item, 1.0, rng, {});
  EXPECT_EQ(all.mask.count(), item.size());
}

TEST(Corrupt, FillFollowsRequestedDistribution) {
  Rng rng(5);
  const Tensor item({1, 1, 16, 16, 16});
  const auto c = corrupt(item, 1.0, rng, {0.2f, 0.5f});
  double mean = 0, sq = 0;
  for (float v : c.values.values()) mean += v;
  mean /= static_cast<double>(c.values.size());
  for (float v : c.values.values()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.2, 0.05);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(c.values.size())), 0.5, 0.05);
}

TEST(Resample, BlockMeansAgainstBruteForce) {
  Tensor64 x({1, 1, 2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) x[i] = static_cast<double>(i);
  EXPECT_DOUBLE_EQ(downscale(x, 2)[0], 3.5);

  Rng rng(6);
  const auto y = support::random_tensor<double>({2, 3, 4, 6, 8}, rng);
  const auto low = downscale(y, 2);
  EXPECT_EQ(low.shape(), (Shape{2, 3, 2, 3, 4}));
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t z = 0; z < 2; ++z) {
      for (std::size_t yy = 0; yy < 3; ++yy) {
        for (std::size_t x0 = 0; x0 < 4; ++x0) {
          double sum = 0;
          for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
              for (std::size_t c = 0; c < 2; ++c) {
                sum += y[p * 192 + ((2 * z + a) * 6 + 2 * yy + b) * 8 + 2 * x0 + c];
              }
            }
          }
          EXPECT_NEAR(low[p * 24 + (z * 3 + yy) * 4 + x0], sum / 8, 1e-14);
        }
      }
    }
  }
}

TEST(Resample, OperatorAlgebra) {
  Rng rng(7);
  const Tensor64 constant({1, 1, 4, 4, 4}, 0.75);
  EXPECT_EQ(downscale(constant, 2), Tensor64({1, 1, 2, 2, 2}, 0.75));
  EXPECT_EQ(upscale(Tensor64({1, 1, 2, 2, 2}, 0.75), 2), constant);

  const auto low = support::random_tensor<double>({2, 1, 3, 3, 3}, rng);
  EXPECT_TRUE(bit_identical(downscale(upscale(low, 2), 2), low));
  const auto lowf = support::random_tensor<float>({1, 1, 4, 4, 4}, rng);
  EXPECT_TRUE(bit_identical(downscale(upscale(lowf, 2), 2), lowf));

  EXPECT_EQ(project_nullspace(upscale(low, 3), 3).squared_norm(), 0.0);

  const auto delta = support::random_tensor<double>({2, 1, 6, 6, 6}, rng);
  const auto p = project_nullspace(delta, 2);
  EXPECT_LT(max_abs_diff(project_nullspace(p, 2), p), 1e-10);
  const auto means = downscale(p, 2);
  for (double m : means.values()) EXPECT_LT(std::abs(m), 1e-10);

  // Symmetry of C-C: <C-C a, b> == <a, C-C b>.
  const auto a = support::random_tensor<double>({1, 1, 4, 4, 4}, rng);
  const auto b = support::random_tensor<double>({1, 1, 4, 4, 4}, rng);
  EXPECT_NEAR(dot(upscale(downscale(a, 2), 2), b), dot(a, upscale(downscale(b, 2), 2)), 1e-12);

  EXPECT_THROW(downscale(Tensor64({1, 1, 5, 4, 4}), 2), std::invalid_argument);
  EXPECT_THROW(downscale(Tensor64({1, 4, 4, 4}), 2), ShapeError);
}

TEST(Synthetic, ReproducibleConnectedAndCounted) {
  SyntheticShapeSpec spec;
  for (auto family : {ShapeFamily::Cuboid, ShapeFamily::Ellipsoid, ShapeFamily::LBracket}) {
    spec.family = family;
    Rng a(11), b(11);
    const auto da = make_synthetic_dataset(spec, 20, a);
    const auto db = make_synthetic_dataset(spec, 20, b);
    EXPECT_EQ(da, db);
    for (const auto& g : da) {
      EXPECT_NO_THROW(g.validate());
      EXPECT_GT(g.count(), 0u);
      EXPECT_TRUE(is_connected(g)) << to_string(family);
      EXPECT_EQ(g.label, static_cast<int>(family));
    }
  }
  spec.family = ShapeFamily::Cuboid;
  Rng rng(12);
  for (int i = 0; i < 30; ++i) {
    ShapeParams p;
    const auto g = make_shape(spec, rng, &p);
    EXPECT_EQ(g.count(), p.extent[0] * p.extent[1] * p.extent[2]);
  }
}

TEST(Synthetic, CenteredEllipsoidIsMirrorSymmetric) {
  SyntheticShapeSpec spec{ShapeFamily::Ellipsoid, 16, 5, 12, true};
  Rng rng(13);
  for (int i = 0; i < 10; ++i) {
    const auto g = make_shape(spec, rng);
    const std::size_t n = 16;
    for (std::size_t z = 0; z < n; ++z) {
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const auto v = g.at(z, y, x);
          EXPECT_EQ(v, g.at(n - 1 - z, y, x));
          EXPECT_EQ(v, g.at(z, n - 1 - y, x));
          EXPECT_EQ(v, g.at(z, y, n - 1 - x));
        }
      }
    }
  }
}

TEST(Synthetic, DisconnectedGridDetected) {
  VoxelGrid g({4, 4, 4});
  g.set(0, 0, 0, true);
  g.set(3, 3, 3, true);
  EXPECT_FALSE(is_connected(g));
  g.set(0, 0, 0, false);
  EXPECT_TRUE(is_connected(g));
}
