#include "descnet/networks.hpp"

#include <cmath>

namespace descnet {

template <typename T>
void ParamGrads<T>::axpy(T alpha, const ParamGrads& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("ParamGrads layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].grad_kernel.empty()) layers[i].grad_kernel.axpy(alpha, other.layers[i].grad_kernel);
    if (!layers[i].grad_bias.empty()) layers[i].grad_bias.axpy(alpha, other.layers[i].grad_bias);
  }
}

template <typename T>
void ParamGrads<T>::scale(T factor) {
  for (auto& g : layers) {
    g.grad_kernel *= factor;
    g.grad_bias *= factor;
  }
}

template <typename T>
double ParamGrads<T>::squared_norm() const {
  double acc = 0;
  for (const auto* t : tensors()) acc += t->squared_norm();
  return acc;
}

template <typename T>
std::vector<const BasicTensor<T>*> ParamGrads<T>::tensors() const {
  std::vector<const BasicTensor<T>*> out;
  for (const auto& g : layers) {
    if (!g.grad_kernel.empty()) out.push_back(&g.grad_kernel);
    if (!g.grad_bias.empty()) out.push_back(&g.grad_bias);
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>*> ParamGrads<T>::tensors() {
  std::vector<BasicTensor<T>*> out;
  for (auto& g : layers) {
    if (!g.grad_kernel.empty()) out.push_back(&g.grad_kernel);
    if (!g.grad_bias.empty()) out.push_back(&g.grad_bias);
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>*> parameter_tensors(std::vector<Layer<T>>& layers) {
  std::vector<BasicTensor<T>*> out;
  for (auto& l : layers) {
    if (!l.kernel.empty()) out.push_back(&l.kernel);
    if (!l.bias.empty()) out.push_back(&l.bias);
  }
  return out;
}

template <typename T, typename U>
Layer<U> cast_layer(const Layer<T>& l) {
  Layer<U> o;
  o.kind = l.kind;
  if (!l.kernel.empty()) o.kernel = l.kernel.template cast<U>();
  if (!l.bias.empty()) o.bias = l.bias.template cast<U>();
  o.stride = l.stride;
  o.pad_lo = l.pad_lo;
  o.pad_hi = l.pad_hi;
  o.window = l.window;
  o.out_shape = l.out_shape;
  if (!l.running_mean.empty()) o.running_mean = l.running_mean.template cast<U>();
  if (!l.running_var.empty()) o.running_var = l.running_var.template cast<U>();
  o.momentum = static_cast<U>(l.momentum);
  o.epsilon = static_cast<U>(l.epsilon);
  return o;
}

namespace {

template <typename T>
std::size_t count_params(const std::vector<Layer<T>>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kernel.size() + l.bias.size();
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// DescriptorNet

template <typename T>
Shape DescriptorNet<T>::batch_shape(std::size_t n) const {
  Shape s{n};
  s.insert(s.end(), input_shape.begin(), input_shape.end());
  return s;
}

template <typename T>
void DescriptorNet<T>::validate() const {
  if (!(s > T(0))) throw std::invalid_argument("reference standard deviation s must be positive");
  if (!(temperature > T(0))) throw std::invalid_argument("temperature must be positive");
  if (layers.empty() || layers.back().kind != LayerKind::FullyConnected ||
      layers.back().kernel.dim(0) != 1) {
    throw ShapeError("descriptor must end in a single-output fully-connected head");
  }
  Shape shape = batch_shape(1);
  for (const auto& l : layers) shape = output_shape(l, shape);
  if (shape_numel(shape) != 1) throw ShapeError("descriptor output is not a scalar per item");
}

template <typename T>
void DescriptorNet<T>::check_input(const BasicTensor<T>& y) const {
  if (y.empty()) throw ShapeError("descriptor input batch is empty");
  require_same_shape(y.shape(), batch_shape(y.dim(0)), "descriptor input");
}

template <typename T>
T DescriptorNet<T>::reference_energy(std::span<const T> item) const {
  if (reference == ReferenceKind::Uniform) return T(0);
  double sq = 0;
  for (auto v : item) sq += static_cast<double>(v) * v;
  return static_cast<T>(sq / (2.0 * static_cast<double>(s) * s));
}

template <typename T>
std::vector<T> DescriptorNet<T>::score(const BasicTensor<T>& y) const {
  check_input(y);
  const auto trace = forward_trace(layers, y, Mode::Infer);
  const auto& out = trace.output();
  return std::vector<T>(out.values().begin(), out.values().end());
}

template <typename T>
std::vector<T> DescriptorNet<T>::energy(const BasicTensor<T>& y) const {
  auto f = score(y);
  for (std::size_t n = 0; n < f.size(); ++n) f[n] = reference_energy(y.item(n)) - f[n];
  return f;
}

template <typename T>
BasicTensor<T> DescriptorNet<T>::score_grad_input(const BasicTensor<T>& y) const {
  check_input(y);
  const auto trace = forward_trace(layers, y, Mode::Infer);
  const BasicTensor<T> ones(trace.output().shape(), T(1));
  return backward_trace(layers, trace, ones, Mode::Infer, true, false).grad_input;
}

template <typename T>
typename DescriptorNet<T>::EnergyGrad DescriptorNet<T>::energy_and_grad(
    const BasicTensor<T>& y) const {
  check_input(y);
  const auto trace = forward_trace(layers, y, Mode::Infer);
  const BasicTensor<T> ones(trace.output().shape(), T(1));
  BasicTensor<T> df = backward_trace(layers, trace, ones, Mode::Infer, true, false).grad_input;
  EnergyGrad out;
  out.energy.resize(y.dim(0));
  for (std::size_t n = 0; n < y.dim(0); ++n) {
    out.energy[n] = reference_energy(y.item(n)) - trace.output()[n];
  }
  // dE/dY = Y / s^2 - df/dY
  df *= T(-1);
  if (reference == ReferenceKind::Gaussian) df.axpy(T(1) / (s * s), y);
  df.check_finite("energy gradient");
  out.grad = std::move(df);
  return out;
}

template <typename T>
BasicTensor<T> DescriptorNet<T>::energy_grad_input(const BasicTensor<T>& y) const {
  return energy_and_grad(y).grad;
}

template <typename T>
ParamGrads<T> DescriptorNet<T>::score_grad_params(const BasicTensor<T>& y) const {
  check_input(y);
  const auto trace = forward_trace(layers, y, Mode::Infer);
  const BasicTensor<T> weights(trace.output().shape(), T(1) / static_cast<T>(y.dim(0)));
  ParamGrads<T> g;
  g.layers = backward_trace(layers, trace, weights, Mode::Infer, false, true).params;
  return g;
}

template <typename T>
std::size_t DescriptorNet<T>::parameter_count() const {
  return count_params(layers);
}

// ---------------------------------------------------------------------------
// GeneratorNet

template <typename T>
void GeneratorNet<T>::validate() const {
  if (latent_dim == 0) throw std::invalid_argument("latent dimension must be positive");
  if (sigma < T(0)) throw std::invalid_argument("generator sigma must be nonnegative");
  Shape shape{1, latent_dim};
  for (const auto& l : layers) shape = descnet::output_shape(l, shape);
  Shape expected{1};
  expected.insert(expected.end(), output_shape.begin(), output_shape.end());
  require_same_shape(shape, expected, "generator output");
}

template <typename T>
void GeneratorNet<T>::check_latent(const BasicTensor<T>& z) const {
  if (z.empty() || z.rank() != 2 || z.dim(1) != latent_dim) {
    throw ShapeError("latent batch must be [N, " + std::to_string(latent_dim) + "], got " +
                     shape_str(z.shape()));
  }
}

template <typename T>
BasicTensor<T> GeneratorNet<T>::generate(const BasicTensor<T>& z, bool with_noise, Rng* rng,
                                         Mode mode) const {
  check_latent(z);
  BasicTensor<T> y = forward_trace(layers, z, mode).output();
  if (with_noise && sigma > T(0)) {
    if (rng == nullptr) throw std::invalid_argument("generate with noise needs a random stream");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += static_cast<T>(sigma * rng->normal());
  }
  return y;
}

template <typename T>
typename GeneratorNet<T>::LossGrad GeneratorNet<T>::loss_grad(const BasicTensor<T>& z,
                                                              const BasicTensor<T>& targets,
                                                              Mode mode) const {
  check_latent(z);
  const auto trace = forward_trace(layers, z, mode);
  require_same_shape(targets.shape(), trace.output().shape(), "generator targets");
  const std::size_t N = z.dim(0);
  BasicTensor<T> grad_out(targets.shape());
  double loss = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = static_cast<double>(targets[i]) - trace.output()[i];
    loss += r * r;
    grad_out[i] = static_cast<T>(-2.0 * r / static_cast<double>(N));
  }
  LossGrad out;
  out.loss = loss / static_cast<double>(N);
  out.grads.layers = backward_trace(layers, trace, grad_out, mode, false, true).params;
  return out;
}

template <typename T>
void GeneratorNet<T>::update_running_stats(const BasicTensor<T>& z) {
  check_latent(z);
  const auto trace = forward_trace(layers, z, Mode::Train);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    descnet::update_running_stats(layers[i], trace.values[i]);
  }
}

template <typename T>
std::size_t GeneratorNet<T>::parameter_count() const {
  return count_params(layers);
}

// ---------------------------------------------------------------------------

template <typename T>
void init_weights(std::vector<Layer<T>>& layers, double kernel_std, Rng& rng) {
  for (auto& l : layers) {
    if (l.kind == LayerKind::BatchNorm) {
      l.kernel.fill(T(1));
      l.bias.fill(T(0));
      continue;
    }
    if (l.kernel.empty()) continue;
    for (std::size_t i = 0; i < l.kernel.size(); ++i) {
      l.kernel[i] = static_cast<T>(kernel_std * rng.normal());
    }
    l.bias.fill(T(0));
  }
}

template <typename T>
void init_descriptor(DescriptorNet<T>& net, Rng& rng) {
  init_weights(net.layers, 0.01, rng);
}

template <typename T>
void init_generator(GeneratorNet<T>& net, Rng& rng) {
  init_weights(net.layers, 0.02, rng);
}

template <typename T>
double reconstruction_error_per_voxel(const GeneratorNet<T>& gen, const BasicTensor<T>& z,
                                      const BasicTensor<T>& targets, Mode mode) {
  const auto y = gen.generate(z, false, nullptr, mode);
  require_same_shape(y.shape(), targets.shape(), "reconstruction targets");
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = static_cast<double>(targets[i]) - y[i];
    acc += r * r;
  }
  return acc / static_cast<double>(y.size());
}

#define DESCNET_INSTANTIATE_NETWORKS(T)                                                          \
  template struct ParamGrads<T>;                                                                 \
  template std::vector<BasicTensor<T>*> parameter_tensors(std::vector<Layer<T>>&);               \
  template class DescriptorNet<T>;                                                               \
  template class GeneratorNet<T>;                                                                \
  template void init_weights(std::vector<Layer<T>>&, double, Rng&);                              \
  template void init_descriptor(DescriptorNet<T>&, Rng&);                                        \
  template void init_generator(GeneratorNet<T>&, Rng&);                                          \
  template double reconstruction_error_per_voxel(const GeneratorNet<T>&, const BasicTensor<T>&,  \
                                                 const BasicTensor<T>&, Mode);

DESCNET_INSTANTIATE_NETWORKS(float)
DESCNET_INSTANTIATE_NETWORKS(double)

template Layer<double> cast_layer<float, double>(const Layer<float>&);
template Layer<float> cast_layer<double, float>(const Layer<double>&);
template Layer<float> cast_layer<float, float>(const Layer<float>&);
template Layer<double> cast_layer<double, double>(const Layer<double>&);

}  // namespace descnet
