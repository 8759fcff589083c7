#pragma once

#include <cstdint>
#include <vector>

#include "descnet/layers.hpp"
#include "descnet/rng.hpp"
#include "descnet/tensor.hpp"

namespace descnet {

/// Reference distribution p0 that the score f(Y) tilts.
enum class ReferenceKind : std::uint8_t {
  Gaussian = 0,  ///< p0 ~ N(0, s^2 I): E(Y) = |Y|^2 / (2 s^2) - f(Y)
  Uniform = 1,   ///< p0 uniform on a bounded range: E(Y) = -f(Y)
};

/// Per-layer parameter gradients of a layer stack, aligned with its layers.
template <typename T>
struct ParamGrads {
  std::vector<LayerGrads<T>> layers;

  /// this += alpha * other
  void axpy(T alpha, const ParamGrads& other);
  void scale(T factor);
  double squared_norm() const;
  /// Non-null gradient tensors in parameter order.
  std::vector<const BasicTensor<T>*> tensors() const;
  std::vector<BasicTensor<T>*> tensors();
};

template <typename T>
ParamGrads<T> operator-(ParamGrads<T> a, const ParamGrads<T>& b) {
  a.axpy(T(-1), b);
  return a;
}

/// Kernel and bias tensors of every parameterized layer, in layer order.
template <typename T>
std::vector<BasicTensor<T>*> parameter_tensors(std::vector<Layer<T>>& layers);

template <typename T, typename U>
Layer<U> cast_layer(const Layer<T>& layer);

/// Energy-based model over voxel volumes: a bottom-up scoring network f(Y)
/// ending in a single-output fully-connected head, tilting a reference
/// distribution with standard deviation `s`. The partition function is never
/// needed: every gradient below is free of it.
template <typename T>
class DescriptorNet {
 public:
  std::vector<Layer<T>> layers;
  /// Per-item input shape, e.g. [1, 32, 32, 32].
  Shape input_shape;
  T s = T(0.5);
  T temperature = T(1);
  ReferenceKind reference = ReferenceKind::Gaussian;

  /// Throws unless the stack maps `input_shape` to one scalar and s, T > 0.
  void validate() const;

  /// f(Y) for each batch item.
  std::vector<T> score(const BasicTensor<T>& y) const;
  /// E(Y) for each batch item (temperature is not applied here).
  std::vector<T> energy(const BasicTensor<T>& y) const;
  /// df/dY per item.
  BasicTensor<T> score_grad_input(const BasicTensor<T>& y) const;
  /// dE/dY per item.
  BasicTensor<T> energy_grad_input(const BasicTensor<T>& y) const;
  /// Batch mean of df/dtheta.
  ParamGrads<T> score_grad_params(const BasicTensor<T>& y) const;

  struct EnergyGrad {
    std::vector<T> energy;
    BasicTensor<T> grad;
  };
  /// E(Y) and dE/dY from a single forward pass.
  EnergyGrad energy_and_grad(const BasicTensor<T>& y) const;

  std::vector<BasicTensor<T>*> parameters() { return parameter_tensors(layers); }
  std::size_t parameter_count() const;

  template <typename U>
  DescriptorNet<U> cast() const {
    DescriptorNet<U> out;
    for (const auto& l : layers) out.layers.push_back(cast_layer<T, U>(l));
    out.input_shape = input_shape;
    out.s = static_cast<U>(s);
    out.temperature = static_cast<U>(temperature);
    out.reference = reference;
    return out;
  }

  /// Prepends the batch axis to `input_shape`.
  Shape batch_shape(std::size_t n) const;

 private:
  void check_input(const BasicTensor<T>& y) const;
  T reference_energy(std::span<const T> item) const;
};

/// Top-down generator Y = g(Z) + eps, eps ~ N(0, sigma^2 I), with a
/// fully-connected stem under the latent vector and a Deconv3D stack.
template <typename T>
class GeneratorNet {
 public:
  std::vector<Layer<T>> layers;
  std::size_t latent_dim = 0;
  T sigma = T(0.3);
  /// Per-item output shape, e.g. [1, 32, 32, 32].
  Shape output_shape;

  void validate() const;

  /// g(Z) (+ noise when `with_noise`); Z is [N, latent_dim].
  BasicTensor<T> generate(const BasicTensor<T>& z, bool with_noise, Rng* rng,
                          Mode mode = Mode::Infer) const;

  struct LossGrad {
    /// (1/N) sum_i |target_i - g(z_i)|^2
    double loss = 0;
    ParamGrads<T> grads;
  };
  /// Loss and parameter gradient of the mean squared reconstruction of `targets`.
  LossGrad loss_grad(const BasicTensor<T>& z, const BasicTensor<T>& targets,
                     Mode mode = Mode::Train) const;

  /// Folds batch statistics at every BatchNorm layer into the running statistics.
  void update_running_stats(const BasicTensor<T>& z);

  std::vector<BasicTensor<T>*> parameters() { return parameter_tensors(layers); }
  std::size_t parameter_count() const;

  template <typename U>
  GeneratorNet<U> cast() const {
    GeneratorNet<U> out;
    for (const auto& l : layers) out.layers.push_back(cast_layer<T, U>(l));
    out.latent_dim = latent_dim;
    out.sigma = static_cast<U>(sigma);
    out.output_shape = output_shape;
    return out;
  }

 private:
  void check_latent(const BasicTensor<T>& z) const;
};

/// Zero-mean Gaussian kernels with the given std, zero biases, unit BatchNorm scale.
template <typename T>
void init_weights(std::vector<Layer<T>>& layers, double kernel_std, Rng& rng);

/// Default initialisation: std 0.01 for descriptor kernels.
template <typename T>
void init_descriptor(DescriptorNet<T>& net, Rng& rng);
/// Default initialisation: std 0.02 for generator kernels.
template <typename T>
void init_generator(GeneratorNet<T>& net, Rng& rng);

/// Mean squared error per voxel between `targets` and g(z): loss / D.
template <typename T>
double reconstruction_error_per_voxel(const GeneratorNet<T>& gen, const BasicTensor<T>& z,
                                      const BasicTensor<T>& targets, Mode mode = Mode::Train);

}  // namespace descnet
