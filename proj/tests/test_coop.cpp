#include <gtest/gtest.h>

#include <cmath>

#include "descnet/coop.hpp"
#include "support.hpp"

using namespace descnet;

namespace {

struct Pair {
  DescriptorNet<double> desc;
  GeneratorNet<double> gen;
};

Pair make_pair_nets(std::uint64_t seed) {
  Rng rng(seed);
  return {support::tiny_descriptor<double>(rng, 4), support::tiny_generator<double>(rng)};
}

CoopConfig small_config() {
  CoopConfig cfg;
  cfg.batch_size = 3;
  cfg.chain_count = 3;
  cfg.langevin.steps = 4;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(CoopIteration, NoLangevinStepsGivesZeroGeneratorGradient) {
  auto nets = make_pair_nets(1);
  const auto gen_before = nets.gen.layers;
  Rng rng(2);
  const auto obs = support::random_tensor<double>(nets.desc.batch_shape(3), rng);
  auto cfg = small_config();
  cfg.langevin.steps = 0;
  CoopState<double> state;
  const auto step = coop_iteration(nets.desc, nets.gen, obs, cfg, state);
  EXPECT_TRUE(bit_identical(step.initial, step.revised));
  EXPECT_EQ(step.reconstruction_error, 0.0);
  // Zero gradient means Adam leaves every generator parameter where it was.
  for (std::size_t i = 0; i < gen_before.size(); ++i) {
    EXPECT_TRUE(bit_identical(nets.gen.layers[i].kernel, gen_before[i].kernel));
    EXPECT_TRUE(bit_identical(nets.gen.layers[i].bias, gen_before[i].bias));
  }
  const auto lg = nets.gen.loss_grad(step.z, step.initial, Mode::Train);
  EXPECT_EQ(lg.grads.squared_norm(), 0.0);
}

TEST(CoopIteration, LatentsAreTraceable) {
  auto nets = make_pair_nets(3);
  auto gen0 = nets.gen;
  Rng rng(4);
  const auto obs = support::random_tensor<double>(nets.desc.batch_shape(3), rng);
  auto cfg = small_config();
  CoopState<double> state;
  const auto step = coop_iteration(nets.desc, nets.gen, obs, cfg, state);
  // The initial chains are exactly g(Z) of the reported Z under the pre-update generator.
  EXPECT_TRUE(bit_identical(step.initial, gen0.generate(step.z, false, nullptr, Mode::Train)));
  const auto lg = gen0.loss_grad(step.z, step.revised, Mode::Train);
  EXPECT_EQ(step.reconstruction_error, lg.loss / 64.0);
  EXPECT_GT(step.reconstruction_error, 0.0);
  EXPECT_EQ(state.iteration, 1u);
}

TEST(CoopIteration, DeterministicForFixedSeed) {
  auto run = [](std::uint64_t seed) {
    auto nets = make_pair_nets(6);
    Rng rng(7);
    const auto obs = support::random_tensor<double>(nets.desc.batch_shape(3), rng);
    auto cfg = small_config();
    cfg.seed = seed;
    CoopState<double> state;
    coop_iteration(nets.desc, nets.gen, obs, cfg, state);
    return coop_iteration(nets.desc, nets.gen, obs, cfg, state);
  };
  const auto a = run(1), b = run(1), c = run(2);
  EXPECT_TRUE(bit_identical(a.z, b.z));
  EXPECT_TRUE(bit_identical(a.initial, b.initial));
  EXPECT_TRUE(bit_identical(a.revised, b.revised));
  EXPECT_FALSE(bit_identical(a.z, c.z));
}

TEST(CoopIteration, InitNoiseFlag) {
  auto nets = make_pair_nets(8);
  auto gen0 = nets.gen;
  Rng rng(9);
  const auto obs = support::random_tensor<double>(nets.desc.batch_shape(3), rng);
  auto cfg = small_config();
  cfg.init_noise = true;
  cfg.langevin.steps = 0;
  CoopState<double> state;
  const auto step = coop_iteration(nets.desc, nets.gen, obs, cfg, state);
  const auto clean = gen0.generate(step.z, false, nullptr, Mode::Train);
  const double rms = std::sqrt(max_abs_diff(step.initial, clean) > 0
                                   ? (step.initial - clean).squared_norm() / clean.size()
                                   : 0.0);
  EXPECT_NEAR(rms, 0.3, 0.08);
}

TEST(TrainCoop, RecordsEveryIteration) {
  auto nets = make_pair_nets(10);
  Rng rng(11);
  const auto data = support::random_tensor<double>(nets.desc.batch_shape(5), rng);
  auto cfg = small_config();
  cfg.iterations = 4;
  std::size_t calls = 0;
  cfg.on_iteration = [&](std::size_t, double) { ++calls; };
  const auto result = train_coop(data, nets.desc, nets.gen, cfg);
  EXPECT_EQ(result.reconstruction_error.size(), 4u);
  EXPECT_EQ(result.value.size(), 4u);
  EXPECT_EQ(calls, 4u);
}

TEST(Interpolate, EndpointsMidpointAndConstantPath) {
  Rng rng(12);
  auto gen = support::tiny_generator<double>(rng);
  const auto z1 = sample_latent<double>(1, 3, rng);
  const auto z2 = sample_latent<double>(1, 3, rng);
  const auto path = interpolate(gen, z1, z2, 4);
  ASSERT_EQ(path.size(), 5u);
  EXPECT_TRUE(bit_identical(path.front(), gen.generate(z1, false, nullptr)));
  EXPECT_TRUE(bit_identical(path.back(), gen.generate(z2, false, nullptr)));
  Tensor64 mid = z1;
  for (std::size_t j = 0; j < 3; ++j) mid[j] = (z1[j] + z2[j]) / 2;
  EXPECT_TRUE(bit_identical(path[2], gen.generate(mid, false, nullptr)));

  const auto flat = interpolate(gen, z1, z1, 3);
  for (const auto& y : flat) EXPECT_TRUE(bit_identical(y, flat[0]));
  EXPECT_THROW(interpolate(gen, z1, z2, 0), std::invalid_argument);
  EXPECT_THROW(interpolate(gen, z1, sample_latent<double>(1, 4, rng), 2), ShapeError);
}

TEST(LatentArithmetic, Identities) {
  Rng rng(13);
  auto gen = support::tiny_generator<double>(rng);
  const auto za = sample_latent<double>(1, 3, rng);
  const auto zb = sample_latent<double>(1, 3, rng);
  const auto zc = sample_latent<double>(1, 3, rng);
  EXPECT_LT(max_abs_diff(latent_arithmetic(gen, za, zb, zb), gen.generate(za, false, nullptr)), 1e-12);
  EXPECT_TRUE(bit_identical(latent_arithmetic(gen, za, za, zc), gen.generate(zc, false, nullptr)));
  Tensor64 z = za;
  for (std::size_t j = 0; j < 3; ++j) z[j] = za[j] - zb[j] + zc[j];
  EXPECT_TRUE(bit_identical(latent_arithmetic(gen, za, zb, zc), gen.generate(z, false, nullptr)));
}
