#pragma once

// Volumetric convolution and pooling kernels on raw NCDHW buffers.
//
// Two implementations share one contract. `reference` is a direct serial
// loop nest kept as the test oracle; `parallel` lowers to im2col + GEMM and
// spreads independent batch items over OpenMP threads. Reductions across
// batch items (parameter gradients) are always accumulated in item order so
// results do not depend on the thread count.

#include <cstddef>
#include <span>

#include "descnet/tensor.hpp"

namespace descnet::kernels {

struct ConvGeometry {
  int in_channels = 1;
  int out_channels = 1;
  Triple in_dims{1, 1, 1};
  Triple out_dims{1, 1, 1};
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  Triple pad_lo{0, 0, 0};

  std::size_t in_volume() const { return volume(in_dims); }
  std::size_t out_volume() const { return volume(out_dims); }
  std::size_t kernel_volume() const { return volume(kernel); }
  /// Rows of the im2col matrix.
  std::size_t patch_size() const { return static_cast<std::size_t>(in_channels) * kernel_volume(); }
  std::size_t in_item_size() const { return static_cast<std::size_t>(in_channels) * in_volume(); }
  std::size_t out_item_size() const { return static_cast<std::size_t>(out_channels) * out_volume(); }

  static std::size_t volume(const Triple& t) {
    return static_cast<std::size_t>(t[0]) * static_cast<std::size_t>(t[1]) *
           static_cast<std::size_t>(t[2]);
  }
};

/// floor((in + lo + hi - k) / stride) + 1, or throws if the window does not fit.
int conv_output_extent(int in, int kernel, int stride, int pad_lo, int pad_hi);
/// (in - 1) * stride + k - lo - hi.
int deconv_output_extent(int in, int kernel, int stride, int pad_lo, int pad_hi);

/// Builds the geometry of a forward convolution, validating sizes.
ConvGeometry make_conv_geometry(int in_channels, int out_channels, Triple in_dims, Triple kernel,
                                Triple stride, Triple pad_lo, Triple pad_hi);

struct PoolGeometry {
  int channels = 1;
  Triple in_dims{1, 1, 1};
  Triple window{2, 2, 2};
  /// ceil(in / window): windows hanging off the high side see -inf padding.
  Triple out_dims{1, 1, 1};
};

PoolGeometry make_pool_geometry(int channels, Triple in_dims, Triple window);

namespace reference {

// Shapes: in [batch, Ci, in_dims], kernel [Co, Ci, k], bias [Co] (may be empty),
// out [batch, Co, out_dims]. Outputs are overwritten.
template <typename T>
void conv3d_forward(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                    std::span<const T> kernel, std::span<const T> bias, std::span<T> out);

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::size_t batch, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_in);

/// grad_bias may be empty, in which case it is skipped.
template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_kernel,
                            std::span<T> grad_bias);

template <typename T>
void maxpool3d_forward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                       std::span<T> out);

template <typename T>
void maxpool3d_backward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                        std::span<const T> grad_out, std::span<T> grad_in);

}  // namespace reference

namespace parallel {

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                    std::span<const T> kernel, std::span<const T> bias, std::span<T> out);

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::size_t batch, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_in);

template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_kernel,
                            std::span<T> grad_bias);

template <typename T>
void maxpool3d_forward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                       std::span<T> out);

template <typename T>
void maxpool3d_backward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                        std::span<const T> grad_out, std::span<T> grad_in);

/// out[batch, rows] = in[batch, cols] * weight^T + bias, weight is [rows, cols].
template <typename T>
void dense_forward(std::size_t batch, std::size_t rows, std::size_t cols, std::span<const T> in,
                   std::span<const T> weight, std::span<const T> bias, std::span<T> out);

template <typename T>
void dense_backward_input(std::size_t batch, std::size_t rows, std::size_t cols,
                          std::span<const T> grad_out, std::span<const T> weight,
                          std::span<T> grad_in);

template <typename T>
void dense_backward_params(std::size_t batch, std::size_t rows, std::size_t cols,
                           std::span<const T> in, std::span<const T> grad_out,
                           std::span<T> grad_weight, std::span<T> grad_bias);

}  // namespace parallel

}  // namespace descnet::kernels
