#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descnet/kernels.hpp"
#include "descnet/tensor.hpp"

namespace descnet {

enum class LayerKind : std::uint8_t {
  Conv3D = 0,
  Deconv3D = 1,
  FullyConnected = 2,
  ReLU = 3,
  Tanh = 4,
  BatchNorm = 5,
  MaxPool3D = 6,
};

std::string to_string(LayerKind kind);

/// Train mode uses batch statistics in BatchNorm, Infer uses running statistics.
enum class Mode { Train, Infer };

/// One layer of a feed-forward stack. Inputs are batched: [N, C, D, H, W] for
/// volumetric layers, [N, ...] (flattened) for FullyConnected.
///
/// Parameter layout:
///   Conv3D          kernel [Co, Ci, kD, kH, kW], bias [Co]
///   Deconv3D        kernel [Ci, Co, kD, kH, kW], bias [Co]; upsample factor = stride
///   FullyConnected  kernel [out, in], bias [out]; `out_shape` is the per-item view
///                   of the output (defaults to [out])
///   BatchNorm       kernel = gamma [C], bias = beta [C], plus running statistics
template <typename T>
struct Layer {
  LayerKind kind = LayerKind::ReLU;
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
  Triple stride{1, 1, 1};
  Triple pad_lo{0, 0, 0};
  Triple pad_hi{0, 0, 0};
  Triple window{2, 2, 2};
  Shape out_shape;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T momentum = T(0.9);
  T epsilon = T(1e-5);

  bool has_params() const { return !kernel.empty(); }
  int upsample_factor() const { return stride[0]; }

  static Layer conv3d(int in_channels, int out_channels, Triple kernel, Triple stride,
                      Triple pad_lo, Triple pad_hi);
  static Layer deconv3d(int in_channels, int out_channels, Triple kernel, Triple upsample,
                        Triple pad_lo, Triple pad_hi);
  static Layer fully_connected(std::size_t in_features, std::size_t out_features,
                               Shape out_shape = {});
  static Layer batch_norm(int channels);
  static Layer relu();
  static Layer tanh();
  static Layer maxpool3d(Triple window);
};

/// Parameter gradients of one layer; both tensors are null for parameter-free layers.
template <typename T>
struct LayerGrads {
  BasicTensor<T> grad_kernel;
  BasicTensor<T> grad_bias;
};

/// Output shape (including the batch axis) for a given input shape.
template <typename T>
Shape output_shape(const Layer<T>& layer, const Shape& input);

template <typename T>
BasicTensor<T> forward(const Layer<T>& layer, const BasicTensor<T>& input, Mode mode);

/// d(sum(grad_out * forward(input)))/d(input).
template <typename T>
BasicTensor<T> backward_input(const Layer<T>& layer, const BasicTensor<T>& input,
                              const BasicTensor<T>& grad_out, Mode mode = Mode::Train);

/// d(sum(grad_out * forward(input)))/d(kernel, bias), summed over the batch.
template <typename T>
LayerGrads<T> backward_params(const Layer<T>& layer, const BasicTensor<T>& input,
                              const BasicTensor<T>& grad_out, Mode mode = Mode::Train);

/// Folds the batch statistics of `input` into a BatchNorm layer's running
/// statistics; no-op for other kinds.
template <typename T>
void update_running_stats(Layer<T>& layer, const BasicTensor<T>& input);

/// Max pooling over [N, C, D, H, W]; ragged high-side windows see -inf padding.
template <typename T>
BasicTensor<T> maxpool3d(const BasicTensor<T>& input, Triple window);

/// Convolution geometry of a Conv3D layer, or the adjoint convolution of a
/// Deconv3D layer (whose "input" is the deconvolution output).
template <typename T>
kernels::ConvGeometry conv_geometry(const Layer<T>& layer, const Shape& input);

/// Activations recorded by a forward pass through a layer stack:
/// `values[i]` is the input of layer i and `values.back()` the final output.
template <typename T>
struct ForwardTrace {
  std::vector<BasicTensor<T>> values;
  const BasicTensor<T>& output() const { return values.back(); }
};

template <typename T>
ForwardTrace<T> forward_trace(const std::vector<Layer<T>>& layers, const BasicTensor<T>& input,
                              Mode mode);

template <typename T>
struct StackGradients {
  BasicTensor<T> grad_input;
  std::vector<LayerGrads<T>> params;
};

/// Back-propagates `grad_out` through the whole stack.
template <typename T>
StackGradients<T> backward_trace(const std::vector<Layer<T>>& layers, const ForwardTrace<T>& trace,
                                 const BasicTensor<T>& grad_out, Mode mode, bool want_input,
                                 bool want_params);

}  // namespace descnet
