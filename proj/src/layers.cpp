#include "descnet/layers.hpp"

#include <cmath>

namespace descnet {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv3D: return "Conv3D";
    case LayerKind::Deconv3D: return "Deconv3D";
    case LayerKind::FullyConnected: return "FullyConnected";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Tanh: return "Tanh";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::MaxPool3D: return "MaxPool3D";
  }
  return "unknown";
}

template <typename T>
Layer<T> Layer<T>::conv3d(int in_channels, int out_channels, Triple kernel, Triple stride,
                          Triple pad_lo, Triple pad_hi) {
  Layer l;
  l.kind = LayerKind::Conv3D;
  l.kernel = BasicTensor<T>({static_cast<std::size_t>(out_channels),
                             static_cast<std::size_t>(in_channels),
                             static_cast<std::size_t>(kernel[0]), static_cast<std::size_t>(kernel[1]),
                             static_cast<std::size_t>(kernel[2])});
  l.bias = BasicTensor<T>({static_cast<std::size_t>(out_channels)});
  l.stride = stride;
  l.pad_lo = pad_lo;
  l.pad_hi = pad_hi;
  return l;
}

template <typename T>
Layer<T> Layer<T>::deconv3d(int in_channels, int out_channels, Triple kernel, Triple upsample,
                            Triple pad_lo, Triple pad_hi) {
  Layer l;
  l.kind = LayerKind::Deconv3D;
  l.kernel = BasicTensor<T>({static_cast<std::size_t>(in_channels),
                             static_cast<std::size_t>(out_channels),
                             static_cast<std::size_t>(kernel[0]), static_cast<std::size_t>(kernel[1]),
                             static_cast<std::size_t>(kernel[2])});
  l.bias = BasicTensor<T>({static_cast<std::size_t>(out_channels)});
  l.stride = upsample;
  l.pad_lo = pad_lo;
  l.pad_hi = pad_hi;
  return l;
}

template <typename T>
Layer<T> Layer<T>::fully_connected(std::size_t in_features, std::size_t out_features,
                                   Shape out_shape) {
  Layer l;
  l.kind = LayerKind::FullyConnected;
  l.kernel = BasicTensor<T>({out_features, in_features});
  l.bias = BasicTensor<T>({out_features});
  if (out_shape.empty()) out_shape = {out_features};
  if (shape_numel(out_shape) != out_features) {
    throw ShapeError("fully-connected out_shape " + shape_str(out_shape) + " does not hold " +
                     std::to_string(out_features) + " features");
  }
  l.out_shape = std::move(out_shape);
  return l;
}

template <typename T>
Layer<T> Layer<T>::batch_norm(int channels) {
  Layer l;
  l.kind = LayerKind::BatchNorm;
  const Shape s{static_cast<std::size_t>(channels)};
  l.kernel = BasicTensor<T>(s, T(1));
  l.bias = BasicTensor<T>(s, T(0));
  l.running_mean = BasicTensor<T>(s, T(0));
  l.running_var = BasicTensor<T>(s, T(1));
  return l;
}

template <typename T>
Layer<T> Layer<T>::relu() {
  Layer l;
  l.kind = LayerKind::ReLU;
  return l;
}

template <typename T>
Layer<T> Layer<T>::tanh() {
  Layer l;
  l.kind = LayerKind::Tanh;
  return l;
}

template <typename T>
Layer<T> Layer<T>::maxpool3d(Triple window) {
  Layer l;
  l.kind = LayerKind::MaxPool3D;
  l.window = window;
  return l;
}

namespace {

Triple spatial(const Shape& s) {
  return {static_cast<int>(s[2]), static_cast<int>(s[3]), static_cast<int>(s[4])};
}

void require_volumetric(const Shape& s, const char* what) {
  if (s.size() != 5) throw ShapeError(std::string(what) + " expects [N,C,D,H,W], got " + shape_str(s));
}

template <typename T>
Triple deconv_out_dims(const Layer<T>& l, const Shape& input) {
  Triple d{};
  for (int a = 0; a < 3; ++a) {
    d[a] = kernels::deconv_output_extent(static_cast<int>(input[2 + a]),
                                         static_cast<int>(l.kernel.dim(2 + a)), l.stride[a],
                                         l.pad_lo[a], l.pad_hi[a]);
  }
  return d;
}

// Per-channel batch mean and (biased) variance over the batch and spatial axes.
template <typename T>
void channel_stats(const BasicTensor<T>& x, std::vector<double>& mean, std::vector<double>& var) {
  const std::size_t N = x.dim(0);
  const std::size_t C = x.dim(1);
  const std::size_t S = x.item_size() / C;
  mean.assign(C, 0.0);
  var.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = x.data() + (n * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) acc += p[i];
    }
    const double m = acc / static_cast<double>(N * S);
    double v = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = x.data() + (n * C + c) * S;
      for (std::size_t i = 0; i < S; ++i) v += (p[i] - m) * (p[i] - m);
    }
    mean[c] = m;
    var[c] = v / static_cast<double>(N * S);
  }
}

template <typename T>
void bn_statistics(const Layer<T>& l, const BasicTensor<T>& x, Mode mode, std::vector<double>& mean,
                   std::vector<double>& inv_std) {
  const std::size_t C = x.dim(1);
  std::vector<double> var;
  if (mode == Mode::Train) {
    channel_stats(x, mean, var);
  } else {
    mean.assign(C, 0.0);
    var.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = l.running_mean[c];
      var[c] = l.running_var[c];
    }
  }
  inv_std.resize(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + l.epsilon);
}

}  // namespace

template <typename T>
kernels::ConvGeometry conv_geometry(const Layer<T>& l, const Shape& input) {
  require_volumetric(input, "convolution");
  if (l.kind == LayerKind::Conv3D) {
    if (input[1] != l.kernel.dim(1)) {
      throw ShapeError("Conv3D expects " + std::to_string(l.kernel.dim(1)) + " input channels, got " +
                       std::to_string(input[1]));
    }
    return kernels::make_conv_geometry(
        static_cast<int>(l.kernel.dim(1)), static_cast<int>(l.kernel.dim(0)), spatial(input),
        {static_cast<int>(l.kernel.dim(2)), static_cast<int>(l.kernel.dim(3)),
         static_cast<int>(l.kernel.dim(4))},
        l.stride, l.pad_lo, l.pad_hi);
  }
  if (l.kind == LayerKind::Deconv3D) {
    if (input[1] != l.kernel.dim(0)) {
      throw ShapeError("Deconv3D expects " + std::to_string(l.kernel.dim(0)) +
                       " input channels, got " + std::to_string(input[1]));
    }
    const Triple out = deconv_out_dims(l, input);
    kernels::ConvGeometry g = kernels::make_conv_geometry(
        static_cast<int>(l.kernel.dim(1)), static_cast<int>(l.kernel.dim(0)), out,
        {static_cast<int>(l.kernel.dim(2)), static_cast<int>(l.kernel.dim(3)),
         static_cast<int>(l.kernel.dim(4))},
        l.stride, l.pad_lo, l.pad_hi);
    if (g.out_dims != spatial(input)) throw ShapeError("Deconv3D geometry is not invertible");
    return g;
  }
  throw ShapeError("conv_geometry called on " + to_string(l.kind));
}

template <typename T>
Shape output_shape(const Layer<T>& l, const Shape& input) {
  if (input.empty()) throw ShapeError("layer input has no batch axis");
  switch (l.kind) {
    case LayerKind::Conv3D: {
      const auto g = conv_geometry(l, input);
      return {input[0], static_cast<std::size_t>(g.out_channels),
              static_cast<std::size_t>(g.out_dims[0]), static_cast<std::size_t>(g.out_dims[1]),
              static_cast<std::size_t>(g.out_dims[2])};
    }
    case LayerKind::Deconv3D: {
      const auto g = conv_geometry(l, input);
      return {input[0], static_cast<std::size_t>(g.in_channels),
              static_cast<std::size_t>(g.in_dims[0]), static_cast<std::size_t>(g.in_dims[1]),
              static_cast<std::size_t>(g.in_dims[2])};
    }
    case LayerKind::FullyConnected: {
      const std::size_t features = shape_numel(input) / input[0];
      if (features != l.kernel.dim(1)) {
        throw ShapeError("FullyConnected expects " + std::to_string(l.kernel.dim(1)) +
                         " input features, got " + std::to_string(features));
      }
      Shape out{input[0]};
      out.insert(out.end(), l.out_shape.begin(), l.out_shape.end());
      return out;
    }
    case LayerKind::BatchNorm:
      if (input.size() < 2 || input[1] != l.kernel.size()) {
        throw ShapeError("BatchNorm channel mismatch for input " + shape_str(input));
      }
      return input;
    case LayerKind::MaxPool3D: {
      require_volumetric(input, "MaxPool3D");
      const auto g = kernels::make_pool_geometry(static_cast<int>(input[1]), spatial(input), l.window);
      return {input[0], input[1], static_cast<std::size_t>(g.out_dims[0]),
              static_cast<std::size_t>(g.out_dims[1]), static_cast<std::size_t>(g.out_dims[2])};
    }
    case LayerKind::ReLU:
    case LayerKind::Tanh:
      return input;
  }
  throw ShapeError("unknown layer kind");
}

template <typename T>
BasicTensor<T> forward(const Layer<T>& l, const BasicTensor<T>& input, Mode mode) {
  BasicTensor<T> out(output_shape(l, input.shape()));
  const std::size_t N = input.dim(0);
  switch (l.kind) {
    case LayerKind::Conv3D: {
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_forward<T>(g, N, input.span(), l.kernel.span(), l.bias.span(),
                                           out.span());
      break;
    }
    case LayerKind::Deconv3D: {
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_backward_input<T>(g, N, input.span(), l.kernel.span(), out.span());
      const std::size_t S = g.in_volume();
      for (std::size_t n = 0; n < N; ++n) {
        for (int c = 0; c < g.in_channels; ++c) {
          T* p = out.data() + (n * g.in_channels + c) * S;
          for (std::size_t i = 0; i < S; ++i) p[i] += l.bias[c];
        }
      }
      break;
    }
    case LayerKind::FullyConnected:
      kernels::parallel::dense_forward<T>(N, l.kernel.dim(0), l.kernel.dim(1), input.span(),
                                          l.kernel.span(), l.bias.span(), out.span());
      break;
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::tanh(input[i]);
      break;
    case LayerKind::BatchNorm: {
      std::vector<double> mean, inv_std;
      bn_statistics(l, input, mode, mean, inv_std);
      const std::size_t C = input.dim(1);
      const std::size_t S = input.item_size() / C;
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t base = (n * C + c) * S;
          for (std::size_t i = 0; i < S; ++i) {
            out[base + i] = static_cast<T>(l.kernel[c] * (input[base + i] - mean[c]) * inv_std[c] +
                                           l.bias[c]);
          }
        }
      }
      break;
    }
    case LayerKind::MaxPool3D:
      return maxpool3d(input, l.window);
  }
  out.check_finite(("forward " + to_string(l.kind)).c_str());
  return out;
}

template <typename T>
BasicTensor<T> backward_input(const Layer<T>& l, const BasicTensor<T>& input,
                              const BasicTensor<T>& grad_out, Mode mode) {
  require_same_shape(output_shape(l, input.shape()), grad_out.shape(), "backward_input grad_out");
  BasicTensor<T> gin(input.shape());
  const std::size_t N = input.dim(0);
  switch (l.kind) {
    case LayerKind::Conv3D: {
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_backward_input<T>(g, N, grad_out.span(), l.kernel.span(), gin.span());
      break;
    }
    case LayerKind::Deconv3D: {
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_forward<T>(g, N, grad_out.span(), l.kernel.span(), {}, gin.span());
      break;
    }
    case LayerKind::FullyConnected:
      kernels::parallel::dense_backward_input<T>(N, l.kernel.dim(0), l.kernel.dim(1),
                                                 grad_out.span(), l.kernel.span(), gin.span());
      break;
    case LayerKind::ReLU:
      for (std::size_t i = 0; i < input.size(); ++i) gin[i] = input[i] > T(0) ? grad_out[i] : T(0);
      break;
    case LayerKind::Tanh:
      for (std::size_t i = 0; i < input.size(); ++i) {
        const T t = std::tanh(input[i]);
        gin[i] = grad_out[i] * (T(1) - t * t);
      }
      break;
    case LayerKind::BatchNorm: {
      std::vector<double> mean, inv_std;
      bn_statistics(l, input, mode, mean, inv_std);
      const std::size_t C = input.dim(1);
      const std::size_t S = input.item_size() / C;
      const double count = static_cast<double>(N * S);
      for (std::size_t c = 0; c < C; ++c) {
        double g_mean = 0, gx_mean = 0;
        if (mode == Mode::Train) {
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t base = (n * C + c) * S;
            for (std::size_t i = 0; i < S; ++i) {
              const double xhat = (input[base + i] - mean[c]) * inv_std[c];
              g_mean += grad_out[base + i];
              gx_mean += grad_out[base + i] * xhat;
            }
          }
          g_mean /= count;
          gx_mean /= count;
        }
        const double scale = l.kernel[c] * inv_std[c];
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t base = (n * C + c) * S;
          for (std::size_t i = 0; i < S; ++i) {
            const double xhat = (input[base + i] - mean[c]) * inv_std[c];
            gin[base + i] = static_cast<T>(scale * (grad_out[base + i] - g_mean - xhat * gx_mean));
          }
        }
      }
      break;
    }
    case LayerKind::MaxPool3D: {
      const auto g = kernels::make_pool_geometry(static_cast<int>(input.dim(1)), spatial(input.shape()),
                                                 l.window);
      kernels::parallel::maxpool3d_backward<T>(g, N, input.span(), grad_out.span(), gin.span());
      break;
    }
  }
  gin.check_finite(("backward_input " + to_string(l.kind)).c_str());
  return gin;
}

template <typename T>
LayerGrads<T> backward_params(const Layer<T>& l, const BasicTensor<T>& input,
                              const BasicTensor<T>& grad_out, Mode mode) {
  if (!l.has_params()) return {};
  require_same_shape(output_shape(l, input.shape()), grad_out.shape(), "backward_params grad_out");
  LayerGrads<T> grads{BasicTensor<T>(l.kernel.shape()), BasicTensor<T>(l.bias.shape())};
  const std::size_t N = input.dim(0);
  switch (l.kind) {
    case LayerKind::Conv3D: {
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_backward_params<T>(g, N, input.span(), grad_out.span(),
                                                   grads.grad_kernel.span(), grads.grad_bias.span());
      break;
    }
    case LayerKind::Deconv3D: {
      // Adjoint convolution: its input is our grad_out, its grad_out is our input.
      const auto g = conv_geometry(l, input.shape());
      kernels::parallel::conv3d_backward_params<T>(g, N, grad_out.span(), input.span(),
                                                   grads.grad_kernel.span(), std::span<T>{});
      const std::size_t S = g.in_volume();
      for (int c = 0; c < g.in_channels; ++c) {
        double acc = 0;
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = grad_out.data() + (n * g.in_channels + c) * S;
          for (std::size_t i = 0; i < S; ++i) acc += p[i];
        }
        grads.grad_bias[c] = static_cast<T>(acc);
      }
      break;
    }
    case LayerKind::FullyConnected:
      kernels::parallel::dense_backward_params<T>(N, l.kernel.dim(0), l.kernel.dim(1), input.span(),
                                                  grad_out.span(), grads.grad_kernel.span(),
                                                  grads.grad_bias.span());
      break;
    case LayerKind::BatchNorm: {
      std::vector<double> mean, inv_std;
      bn_statistics(l, input, mode, mean, inv_std);
      const std::size_t C = input.dim(1);
      const std::size_t S = input.item_size() / C;
      for (std::size_t c = 0; c < C; ++c) {
        double gg = 0, gb = 0;
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t base = (n * C + c) * S;
          for (std::size_t i = 0; i < S; ++i) {
            gg += grad_out[base + i] * (input[base + i] - mean[c]) * inv_std[c];
            gb += grad_out[base + i];
          }
        }
        grads.grad_kernel[c] = static_cast<T>(gg);
        grads.grad_bias[c] = static_cast<T>(gb);
      }
      break;
    }
    default:
      break;
  }
  return grads;
}

template <typename T>
void update_running_stats(Layer<T>& l, const BasicTensor<T>& input) {
  if (l.kind != LayerKind::BatchNorm) return;
  std::vector<double> mean, var;
  channel_stats(input, mean, var);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    l.running_mean[c] = static_cast<T>(l.momentum * l.running_mean[c] + (1 - l.momentum) * mean[c]);
    l.running_var[c] = static_cast<T>(l.momentum * l.running_var[c] + (1 - l.momentum) * var[c]);
  }
}

template <typename T>
BasicTensor<T> maxpool3d(const BasicTensor<T>& input, Triple window) {
  require_volumetric(input.shape(), "maxpool3d");
  const auto g =
      kernels::make_pool_geometry(static_cast<int>(input.dim(1)), spatial(input.shape()), window);
  BasicTensor<T> out({input.dim(0), input.dim(1), static_cast<std::size_t>(g.out_dims[0]),
                      static_cast<std::size_t>(g.out_dims[1]), static_cast<std::size_t>(g.out_dims[2])});
  kernels::parallel::maxpool3d_forward<T>(g, input.dim(0), input.span(), out.span());
  return out;
}

template <typename T>
ForwardTrace<T> forward_trace(const std::vector<Layer<T>>& layers, const BasicTensor<T>& input,
                              Mode mode) {
  ForwardTrace<T> trace;
  trace.values.reserve(layers.size() + 1);
  trace.values.push_back(input);
  for (const auto& l : layers) trace.values.push_back(forward(l, trace.values.back(), mode));
  return trace;
}

template <typename T>
StackGradients<T> backward_trace(const std::vector<Layer<T>>& layers, const ForwardTrace<T>& trace,
                                 const BasicTensor<T>& grad_out, Mode mode, bool want_input,
                                 bool want_params) {
  if (trace.values.size() != layers.size() + 1) throw ShapeError("trace does not match layer stack");
  StackGradients<T> out;
  if (want_params) out.params.resize(layers.size());
  BasicTensor<T> g = grad_out;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& in = trace.values[i];
    if (want_params) out.params[i] = backward_params(layers[i], in, g, mode);
    if (i > 0 || want_input) g = backward_input(layers[i], in, g, mode);
  }
  if (want_input) out.grad_input = std::move(g);
  return out;
}

#define DESCNET_INSTANTIATE_LAYERS(T)                                                            \
  template struct Layer<T>;                                                                      \
  template Shape output_shape(const Layer<T>&, const Shape&);                                    \
  template BasicTensor<T> forward(const Layer<T>&, const BasicTensor<T>&, Mode);                 \
  template BasicTensor<T> backward_input(const Layer<T>&, const BasicTensor<T>&,                 \
                                         const BasicTensor<T>&, Mode);                           \
  template LayerGrads<T> backward_params(const Layer<T>&, const BasicTensor<T>&,                 \
                                         const BasicTensor<T>&, Mode);                           \
  template void update_running_stats(Layer<T>&, const BasicTensor<T>&);                          \
  template BasicTensor<T> maxpool3d(const BasicTensor<T>&, Triple);                              \
  template kernels::ConvGeometry conv_geometry(const Layer<T>&, const Shape&);                   \
  template ForwardTrace<T> forward_trace(const std::vector<Layer<T>>&, const BasicTensor<T>&,    \
                                         Mode);                                                  \
  template StackGradients<T> backward_trace(const std::vector<Layer<T>>&, const ForwardTrace<T>&, \
                                            const BasicTensor<T>&, Mode, bool, bool);

DESCNET_INSTANTIATE_LAYERS(float)
DESCNET_INSTANTIATE_LAYERS(double)

}  // namespace descnet
