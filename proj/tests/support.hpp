#pragma once

#include <cmath>
#include <functional>

#include "descnet/networks.hpp"
#include "descnet/rng.hpp"
#include "descnet/tensor.hpp"

namespace support {

using descnet::BasicTensor;
using descnet::Rng;
using descnet::Shape;

template <typename T>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(sd * rng.normal());
  return t;
}

/// |a - b| / max(|a|, |b|) over whole tensors; 0 when both vanish.
template <typename T>
double relative_error(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0 ? 0 : std::sqrt(diff) / scale;
}

/// Central differences of `f` with respect to every entry of `x` (perturbed in place).
inline descnet::Tensor64 numeric_gradient(descnet::Tensor64& x, const std::function<double()>& f,
                                          double h = 1e-6) {
  descnet::Tensor64 g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Sum of w * y, the scalarisation used for gradient checks.
inline double weighted_sum(const descnet::Tensor64& y, const descnet::Tensor64& w) {
  return descnet::dot(y, w);
}

/// Random kernels and biases for every parameterised layer.
template <typename T>
void randomize(std::vector<descnet::Layer<T>>& layers, Rng& rng, double sd = 0.3) {
  for (auto& l : layers) {
    if (l.kernel.empty()) continue;
    for (std::size_t i = 0; i < l.kernel.size(); ++i) l.kernel[i] = static_cast<T>(sd * rng.normal());
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = static_cast<T>(sd * rng.normal());
    if (l.kind == descnet::LayerKind::BatchNorm) {
      for (std::size_t i = 0; i < l.kernel.size(); ++i) l.kernel[i] = static_cast<T>(1 + 0.2 * rng.normal());
      for (std::size_t i = 0; i < l.running_var.size(); ++i) {
        l.running_mean[i] = static_cast<T>(0.1 * rng.normal());
        l.running_var[i] = static_cast<T>(0.5 + rng.uniform());
      }
    }
  }
}

/// Conv(k3, stride 2, pad 1) + ReLU + fully-connected head on a grid^3 single-channel input.
template <typename T>
descnet::DescriptorNet<T> tiny_descriptor(Rng& rng, std::size_t grid = 5, double s = 0.7,
                                          double sd = 0.5, int filters = 2) {
  using descnet::Layer;
  descnet::DescriptorNet<T> net;
  net.input_shape = {1, grid, grid, grid};
  net.layers.push_back(Layer<T>::conv3d(1, filters, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}, {1, 1, 1}));
  net.layers.push_back(Layer<T>::relu());
  const std::size_t out = (grid + 1) / 2;
  net.layers.push_back(
      Layer<T>::fully_connected(static_cast<std::size_t>(filters) * out * out * out, 1));
  net.s = static_cast<T>(s);
  randomize(net.layers, rng, sd);
  net.validate();
  return net;
}

/// FC stem to 2x2^3, BatchNorm, ReLU, one stride-2 deconvolution to 1x4^3, Tanh.
template <typename T>
descnet::GeneratorNet<T> tiny_generator(Rng& rng, std::size_t latent = 3) {
  using descnet::Layer;
  descnet::GeneratorNet<T> gen;
  gen.latent_dim = latent;
  gen.output_shape = {1, 4, 4, 4};
  gen.layers.push_back(Layer<T>::fully_connected(latent, 2 * 8, {2, 2, 2, 2}));
  gen.layers.push_back(Layer<T>::batch_norm(2));
  gen.layers.push_back(Layer<T>::relu());
  gen.layers.push_back(Layer<T>::deconv3d(2, 1, {4, 4, 4}, {2, 2, 2}, {1, 1, 1}, {1, 1, 1}));
  gen.layers.push_back(Layer<T>::tanh());
  randomize(gen.layers, rng, 0.5);
  gen.validate();
  return gen;
}

}  // namespace support
