#include <gtest/gtest.h>

#include <cmath>

#include "descnet/networks.hpp"
#include "descnet/presets.hpp"
#include "support.hpp"

using namespace descnet;

namespace {

using support::tiny_descriptor;

using support::tiny_generator;

double relu(double x) { return x > 0 ? x : 0; }

/// Straightforward nested-loop score of the tiny descriptor (stride 2, pad 1).
double oracle_score(const DescriptorNet<float>& net, const Tensor& y, std::size_t n, std::size_t G) {
  const auto& conv = net.layers[0];
  const auto& fc = net.layers[2];
  const std::size_t O = (G + 1) / 2;
  double score = fc.bias[0];
  for (std::size_t co = 0; co < 2; ++co) {
    for (std::size_t oz = 0; oz < O; ++oz) {
      for (std::size_t oy = 0; oy < O; ++oy) {
        for (std::size_t ox = 0; ox < O; ++ox) {
          double acc = conv.bias[co];
          for (int kz = 0; kz < 3; ++kz) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const long z = static_cast<long>(oz) * 2 + kz - 1;
                const long yy = static_cast<long>(oy) * 2 + ky - 1;
                const long x = static_cast<long>(ox) * 2 + kx - 1;
                if (z < 0 || yy < 0 || x < 0 || z >= static_cast<long>(G) ||
                    yy >= static_cast<long>(G) || x >= static_cast<long>(G)) {
                  continue;
                }
                acc += static_cast<double>(conv.kernel[co * 27 + (kz * 3 + ky) * 3 + kx]) *
                       y[n * G * G * G + (z * G + yy) * G + x];
              }
            }
          }
          const std::size_t f = ((co * O + oz) * O + oy) * O + ox;
          score += fc.kernel[f] * relu(acc);
        }
      }
    }
  }
  return score;
}

/// Scatter-form deconvolution oracle for the tiny generator in inference mode.
std::vector<double> oracle_generate(const GeneratorNet<float>& gen, const std::vector<double>& z) {
  const auto& fc = gen.layers[0];
  const auto& bn = gen.layers[1];
  const auto& dc = gen.layers[3];
  std::vector<double> h(16);
  for (std::size_t o = 0; o < 16; ++o) {
    double acc = fc.bias[o];
    for (std::size_t i = 0; i < 3; ++i) acc += fc.kernel[o * 3 + i] * z[i];
    const std::size_t c = o / 8;
    const double xhat = (acc - bn.running_mean[c]) / std::sqrt(bn.running_var[c] + bn.epsilon);
    h[o] = relu(bn.kernel[c] * xhat + bn.bias[c]);
  }
  std::vector<double> out(64, dc.bias[0]);
  for (std::size_t ci = 0; ci < 2; ++ci) {
    for (int iz = 0; iz < 2; ++iz) {
      for (int iy = 0; iy < 2; ++iy) {
        for (int ix = 0; ix < 2; ++ix) {
          const double v = h[ci * 8 + (iz * 2 + iy) * 2 + ix];
          for (int kz = 0; kz < 4; ++kz) {
            for (int ky = 0; ky < 4; ++ky) {
              for (int kx = 0; kx < 4; ++kx) {
                const int oz = iz * 2 + kz - 1, oy = iy * 2 + ky - 1, ox = ix * 2 + kx - 1;
                if (oz < 0 || oy < 0 || ox < 0 || oz >= 4 || oy >= 4 || ox >= 4) continue;
                out[(oz * 4 + oy) * 4 + ox] += v * dc.kernel[ci * 64 + (kz * 4 + ky) * 4 + kx];
              }
            }
          }
        }
      }
    }
  }
  for (auto& v : out) v = std::tanh(v);
  return out;
}

}  // namespace

TEST(DescriptorNet, EnergyExamples) {
  Rng rng(1);
  auto net = tiny_descriptor<double>(rng, 5, 0.5);
  for (auto* p : net.parameters()) p->fill(0.0);
  EXPECT_EQ(net.score(Tensor64(net.batch_shape(2)))[1], 0.0);
  EXPECT_EQ(net.energy(Tensor64(net.batch_shape(1)))[0], 0.0);
  Tensor64 y(net.batch_shape(1));
  y[7] = 1.0;  // |Y|^2 = 1
  EXPECT_DOUBLE_EQ(net.energy(y)[0], 2.0);

  auto random = tiny_descriptor<double>(rng);
  for (std::size_t i = 0; i < random.layers.size(); ++i) random.layers[i].bias.fill(0.0);
  EXPECT_EQ(random.score(Tensor64(random.batch_shape(1)))[0], 0.0);

  random.reference = ReferenceKind::Uniform;
  const auto x = support::random_tensor<double>(random.batch_shape(3), rng);
  const auto f = random.score(x);
  const auto e = random.energy(x);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(e[n], -f[n]);
}

TEST(DescriptorNet, ZeroNetEnergyGradientIsScaledInput) {
  Rng rng(2);
  auto net = tiny_descriptor<double>(rng, 5, 1.0);
  for (auto* p : net.parameters()) p->fill(0.0);
  const auto y = support::random_tensor<double>(net.batch_shape(2), rng);
  EXPECT_LT(max_abs_diff(net.energy_grad_input(y), y), 1e-15);
  net.s = 0.5;
  EXPECT_LT(max_abs_diff(net.energy_grad_input(y), 4.0 * y), 1e-14);
}

TEST(DescriptorNet, ScoreMatchesNestedLoopOracle) {
  Rng rng(3);
  auto net = tiny_descriptor<float>(rng, 8);
  const auto y = support::random_tensor<float>(net.batch_shape(3), rng);
  const auto f = net.score(y);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(f[n], oracle_score(net, y, n, 8), 1e-5);
}

TEST(DescriptorNet, EnergyGradientMatchesFiniteDifferences) {
  Rng rng(4);
  auto net = tiny_descriptor<double>(rng);
  Tensor64 y = support::random_tensor<double>(net.batch_shape(2), rng);
  const auto analytic = net.energy_grad_input(y);
  auto total_energy = [&] {
    const auto e = net.energy(y);
    return e[0] + e[1];
  };
  EXPECT_LT(support::relative_error(analytic, support::numeric_gradient(y, total_energy)), 1e-6);

  auto fnet = net.cast<float>();
  auto fy = y.cast<float>();
  const auto fa = fnet.energy_grad_input(fy);
  EXPECT_LT(support::relative_error(fa.cast<double>(), analytic), 1e-4);
}

TEST(DescriptorNet, EnergyGradientAssembledFromTwoTerms) {
  Rng rng(5);
  auto net = tiny_descriptor<double>(rng);
  const auto y = support::random_tensor<double>(net.batch_shape(2), rng);
  Tensor64 assembled = y;
  assembled *= 1.0 / (net.s * net.s);
  assembled -= net.score_grad_input(y);
  EXPECT_LT(max_abs_diff(assembled, net.energy_grad_input(y)), 1e-12);
}

TEST(DescriptorNet, ScoreParamGradientIsBatchMean) {
  Rng rng(6);
  auto net = tiny_descriptor<double>(rng);
  const auto y = support::random_tensor<double>(net.batch_shape(3), rng);
  const auto g = net.score_grad_params(y);
  auto params = net.parameters();
  const auto tensors = g.tensors();
  ASSERT_EQ(params.size(), tensors.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto mean_score = [&] {
      const auto f = net.score(y);
      return (f[0] + f[1] + f[2]) / 3.0;
    };
    EXPECT_LT(support::relative_error(*tensors[i], support::numeric_gradient(*params[i], mean_score)),
              1e-6);
  }

  // A batch of identical items gives the single-item gradient.
  Tensor64 same(net.batch_shape(4));
  for (std::size_t n = 0; n < 4; ++n) same.set_item(n, y.item(0));
  const auto g4 = net.score_grad_params(same);
  const auto g1 = net.score_grad_params(y.item_tensor(0));
  for (std::size_t i = 0; i < g1.tensors().size(); ++i) {
    EXPECT_LT(max_abs_diff(*g4.tensors()[i], *g1.tensors()[i]), 1e-12);
  }
}

TEST(DescriptorNet, TemperatureKeepsArgminSet) {
  Rng rng(7);
  auto net = tiny_descriptor<double>(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto candidates = support::random_tensor<double>(net.batch_shape(6), rng);
    const auto e = net.energy(candidates);
    const double c = 0.1 + 5 * rng.uniform();
    std::vector<double> scaled(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) scaled[i] = e[i] / c;
    const auto a = std::min_element(e.begin(), e.end()) - e.begin();
    const auto b = std::min_element(scaled.begin(), scaled.end()) - scaled.begin();
    EXPECT_EQ(a, b);
  }
}

TEST(DescriptorNet, ValidationRejectsBadConfigurations) {
  Rng rng(8);
  auto net = tiny_descriptor<double>(rng);
  net.s = 0;
  EXPECT_THROW(net.validate(), std::invalid_argument);
  net.s = 1;
  net.temperature = -1;
  EXPECT_THROW(net.validate(), std::invalid_argument);
  net.temperature = 1;
  EXPECT_THROW(net.score(Tensor64({1, 1, 4, 4, 4})), ShapeError);
}

TEST(GeneratorNet, MatchesScatterDeconvolutionOracle) {
  Rng rng(9);
  auto gen = tiny_generator<float>(rng);
  const auto z = support::random_tensor<float>({2, 3}, rng);
  const auto y = gen.generate(z, false, nullptr, Mode::Infer);
  ASSERT_EQ(y.shape(), (Shape{2, 1, 4, 4, 4}));
  for (std::size_t n = 0; n < 2; ++n) {
    const auto expected = oracle_generate(gen, {z[n * 3], z[n * 3 + 1], z[n * 3 + 2]});
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(y[n * 64 + i], expected[i], 1e-5);
  }
}

TEST(GeneratorNet, DeterministicBoundedAndNoisy) {
  Rng rng(10);
  auto gen = tiny_generator<double>(rng);
  const auto z = support::random_tensor<double>({3, 3}, rng);
  const auto a = gen.generate(z, false, nullptr);
  EXPECT_TRUE(bit_identical(a, gen.generate(z, false, nullptr)));
  for (double v : a.values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  // Far out in latent space tanh rounds to +-1 but never leaves the range.
  const auto far = gen.generate(support::random_tensor<double>({3, 3}, rng, 100.0), false, nullptr);
  for (double v : far.values()) EXPECT_LE(std::abs(v), 1.0);
  gen.sigma = 0.3;
  Rng noise(1);
  const auto b = gen.generate(z, true, &noise);
  double var = 0;
  for (std::size_t i = 0; i < a.size(); ++i) var += (b[i] - a[i]) * (b[i] - a[i]);
  var /= static_cast<double>(a.size());
  EXPECT_NEAR(std::sqrt(var), 0.3, 0.1);
  EXPECT_THROW(gen.generate(Tensor64({1, 4}), false, nullptr), ShapeError);
}

TEST(GeneratorNet, LossGradientMatchesFiniteDifferences) {
  Rng rng(11);
  auto gen = tiny_generator<double>(rng);
  const auto z = support::random_tensor<double>({3, 3}, rng);
  const auto targets = support::random_tensor<double>({3, 1, 4, 4, 4}, rng, 0.5);
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    const auto lg = gen.loss_grad(z, targets, mode);
    auto params = gen.parameters();
    const auto tensors = lg.grads.tensors();
    ASSERT_EQ(params.size(), tensors.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto loss = [&] { return gen.loss_grad(z, targets, mode).loss; };
      EXPECT_LT(support::relative_error(*tensors[i], support::numeric_gradient(*params[i], loss)),
                1e-6);
    }
  }
}

TEST(GeneratorNet, LossGradientZeroAtTargetsAndLinearInResidual) {
  Rng rng(12);
  auto gen = tiny_generator<double>(rng);
  const auto z = support::random_tensor<double>({2, 3}, rng);
  const auto y = gen.generate(z, false, nullptr, Mode::Train);
  const auto at = gen.loss_grad(z, y, Mode::Train);
  EXPECT_EQ(at.loss, 0.0);
  EXPECT_EQ(at.grads.squared_norm(), 0.0);

  // With BatchNorm frozen (inference statistics) the gradient is linear in the residual.
  const auto r = support::random_tensor<double>(y.shape(), rng, 0.1);
  const auto yi = gen.generate(z, false, nullptr, Mode::Infer);
  const auto g1 = gen.loss_grad(z, yi + r, Mode::Infer).grads;
  const auto g2 = gen.loss_grad(z, yi + 2.0 * r, Mode::Infer).grads;
  for (std::size_t i = 0; i < g1.tensors().size(); ++i) {
    EXPECT_LT(max_abs_diff(2.0 * *g1.tensors()[i], *g2.tensors()[i]), 1e-12);
  }
}

TEST(Networks, CastRoundTripsFloatParameters) {
  Rng rng(13);
  auto net = tiny_descriptor<float>(rng);
  const auto back = net.cast<double>().cast<float>();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    EXPECT_EQ(net.layers[i].kernel, back.layers[i].kernel);
  }
}

TEST(Networks, InitialisationUsesRequestedScale) {
  Rng rng(14);
  auto net = build_descriptor<float>(descriptor_architecture(PresetName::Synthesis3, 32));
  init_descriptor(net, rng);
  const auto& k = net.layers[0].kernel;
  double sq = 0;
  for (float v : k.values()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(k.size())), 0.01, 0.0005);
  EXPECT_EQ(net.layers[0].bias.squared_norm(), 0.0f);
}
