#include <gtest/gtest.h>

#include "descnet/layers.hpp"
#include "support.hpp"

using namespace descnet;

namespace {

using L = Layer<double>;

/// Checks backward_input and backward_params of one layer against central differences.
void check_layer(L layer, Shape input_shape, Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<L> one{layer};
  support::randomize(one, rng);
  layer = one[0];
  Tensor64 x = support::random_tensor<double>(input_shape, rng);
  const Tensor64 w = support::random_tensor<double>(output_shape(layer, input_shape), rng);
  auto objective = [&] { return dot(forward(layer, x, mode), w); };

  const Tensor64 analytic_in = backward_input(layer, x, w, mode);
  const Tensor64 numeric_in = support::numeric_gradient(x, objective);
  EXPECT_LT(support::relative_error(analytic_in, numeric_in), 1e-5) << to_string(layer.kind);

  if (!layer.has_params()) {
    const auto g = backward_params(layer, x, w, mode);
    EXPECT_TRUE(g.grad_kernel.empty());
    EXPECT_TRUE(g.grad_bias.empty());
    return;
  }
  const auto g = backward_params(layer, x, w, mode);
  const Tensor64 numeric_k = support::numeric_gradient(layer.kernel, objective);
  const Tensor64 numeric_b = support::numeric_gradient(layer.bias, objective);
  EXPECT_LT(support::relative_error(g.grad_kernel, numeric_k), 1e-5) << to_string(layer.kind);
  EXPECT_LT(support::relative_error(g.grad_bias, numeric_b), 1e-5) << to_string(layer.kind);
}

}  // namespace

TEST(LayerGradients, Conv3D) {
  check_layer(L::conv3d(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}), {2, 2, 4, 4, 4},
              Mode::Train, 1);
  check_layer(L::conv3d(1, 2, {3, 2, 3}, {2, 2, 1}, {1, 0, 1}, {1, 1, 0}), {2, 1, 5, 6, 4},
              Mode::Train, 2);
}

TEST(LayerGradients, Deconv3D) {
  check_layer(L::deconv3d(3, 2, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}, {1, 1, 1}), {2, 3, 2, 2, 2},
              Mode::Train, 3);
  check_layer(L::deconv3d(2, 1, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}), {1, 2, 3, 3, 3},
              Mode::Train, 4);
}

TEST(LayerGradients, FullyConnected) {
  check_layer(L::fully_connected(2 * 3 * 3 * 3, 4), {3, 2, 3, 3, 3}, Mode::Train, 5);
  check_layer(L::fully_connected(5, 2 * 8, {2, 2, 2, 2}), {2, 5}, Mode::Train, 6);
}

TEST(LayerGradients, ReLUTanhMaxPool) {
  check_layer(L::relu(), {2, 2, 3, 3, 3}, Mode::Train, 7);
  check_layer(L::tanh(), {2, 2, 3, 3, 3}, Mode::Train, 8);
  check_layer(L::maxpool3d({2, 2, 2}), {2, 2, 4, 4, 4}, Mode::Train, 9);
  check_layer(L::maxpool3d({4, 4, 4}), {1, 2, 6, 5, 6}, Mode::Train, 10);
}

TEST(LayerGradients, BatchNormBothModes) {
  check_layer(L::batch_norm(3), {4, 3, 2, 2, 2}, Mode::Train, 11);
  check_layer(L::batch_norm(3), {4, 3, 2, 2, 2}, Mode::Infer, 12);
  check_layer(L::batch_norm(5), {6, 5}, Mode::Train, 13);
}

TEST(LayerForward, ReLUExample) {
  const Tensor64 x({1, 3}, std::vector<double>{-1, 0, 2});
  EXPECT_EQ(forward(L::relu(), x, Mode::Infer).values(), (std::vector<double>{0, 0, 2}));
  const Tensor64 at({1, 2}, std::vector<double>{-1, 2});
  const Tensor64 go({1, 2}, std::vector<double>{5, 5});
  EXPECT_EQ(backward_input(L::relu(), at, go).values(), (std::vector<double>{0, 5}));
}

TEST(LayerForward, ConvOnesExampleThroughLayer) {
  auto conv = L::conv3d(1, 1, {2, 2, 2}, {1, 1, 1}, {0, 0, 0}, {0, 0, 0});
  conv.kernel.fill(1.0);
  const Tensor64 x({1, 1, 3, 3, 3}, 1.0);
  const auto y = forward(conv, x, Mode::Infer);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 8.0);
}

TEST(LayerForward, FullyConnectedParamGradIsOuterProduct) {
  auto fc = L::fully_connected(3, 2);
  const Tensor64 x({1, 3}, std::vector<double>{1, -2, 3});
  const Tensor64 g({1, 2}, std::vector<double>{0.5, -1});
  const auto grads = backward_params(fc, x, g);
  EXPECT_EQ(grads.grad_kernel.values(), (std::vector<double>{0.5, -1, 1.5, -1, 2, -3}));
  EXPECT_EQ(grads.grad_bias.values(), (std::vector<double>{0.5, -1}));
}

TEST(LayerForward, ZeroGradOutGivesZeroGrads) {
  Rng rng(3);
  std::vector<L> layers{L::conv3d(1, 2, {2, 2, 2}, {1, 1, 1}, {0, 0, 0}, {0, 0, 0}),
                        L::fully_connected(4, 3), L::batch_norm(2), L::deconv3d(2, 1, {2, 2, 2}, {2, 2, 2}, {0, 0, 0}, {0, 0, 0})};
  support::randomize(layers, rng);
  const Shape shapes[] = {{2, 1, 3, 3, 3}, {2, 4}, {3, 2, 2, 2, 2}, {1, 2, 2, 2, 2}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto x = support::random_tensor<double>(shapes[i], rng);
    const Tensor64 zero(output_shape(layers[i], shapes[i]));
    const auto gi = backward_input(layers[i], x, zero);
    const auto gp = backward_params(layers[i], x, zero);
    EXPECT_EQ(gi.squared_norm(), 0.0);
    EXPECT_EQ(gp.grad_kernel.squared_norm(), 0.0);
    EXPECT_EQ(gp.grad_bias.squared_norm(), 0.0);
  }
}

TEST(LayerForward, DeterministicAndShapeChecked) {
  Rng rng(4);
  std::vector<L> layers{L::conv3d(2, 3, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}, {1, 1, 1})};
  support::randomize(layers, rng);
  const auto x = support::random_tensor<double>({2, 2, 5, 5, 5}, rng);
  EXPECT_TRUE(bit_identical(forward(layers[0], x, Mode::Infer), forward(layers[0], x, Mode::Infer)));
  EXPECT_THROW(forward(layers[0], Tensor64({2, 3, 5, 5, 5}), Mode::Infer), ShapeError);
  EXPECT_THROW(forward(layers[0], Tensor64({2, 2, 5, 5}), Mode::Infer), ShapeError);
}

TEST(LayerForward, NonFiniteOutputIsAnError) {
  const Tensor64 x({1, 2}, std::vector<double>{std::numeric_limits<double>::infinity(), 1});
  EXPECT_THROW(forward(L::relu(), x, Mode::Infer), NumericError);
}

TEST(BatchNorm, RunningStatisticsUseMomentum) {
  auto bn = L::batch_norm(1);
  const Tensor64 x({4, 1}, std::vector<double>{1, 2, 3, 4});
  update_running_stats(bn, x);
  EXPECT_NEAR(bn.running_mean[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 0.9 * 1.0 + 0.1 * 1.25, 1e-12);
  const auto y = forward(bn, x, Mode::Train);
  EXPECT_NEAR(y.sum(), 0.0, 1e-12);
}
