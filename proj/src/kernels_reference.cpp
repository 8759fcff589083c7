#include <algorithm>
#include <limits>
#include <string>

#include "descnet/kernels.hpp"

namespace descnet::kernels {

int conv_output_extent(int in, int kernel, int stride, int pad_lo, int pad_hi) {
  if (in <= 0 || kernel <= 0 || stride <= 0 || pad_lo < 0 || pad_hi < 0) {
    throw ShapeError("invalid convolution extents");
  }
  const int span = in + pad_lo + pad_hi - kernel;
  if (span < 0) {
    throw ShapeError("kernel " + std::to_string(kernel) + " exceeds padded input " +
                     std::to_string(in + pad_lo + pad_hi));
  }
  return span / stride + 1;
}

int deconv_output_extent(int in, int kernel, int stride, int pad_lo, int pad_hi) {
  if (in <= 0 || kernel <= 0 || stride <= 0 || pad_lo < 0 || pad_hi < 0) {
    throw ShapeError("invalid deconvolution extents");
  }
  const int out = (in - 1) * stride + kernel - pad_lo - pad_hi;
  if (out <= 0) throw ShapeError("deconvolution output extent is not positive");
  return out;
}

ConvGeometry make_conv_geometry(int in_channels, int out_channels, Triple in_dims, Triple kernel,
                                Triple stride, Triple pad_lo, Triple pad_hi) {
  ConvGeometry g;
  g.in_channels = in_channels;
  g.out_channels = out_channels;
  g.in_dims = in_dims;
  g.kernel = kernel;
  g.stride = stride;
  g.pad_lo = pad_lo;
  for (int a = 0; a < 3; ++a) {
    g.out_dims[a] = conv_output_extent(in_dims[a], kernel[a], stride[a], pad_lo[a], pad_hi[a]);
  }
  return g;
}

PoolGeometry make_pool_geometry(int channels, Triple in_dims, Triple window) {
  PoolGeometry g;
  g.channels = channels;
  g.in_dims = in_dims;
  g.window = window;
  for (int a = 0; a < 3; ++a) {
    if (window[a] <= 0 || in_dims[a] <= 0) throw ShapeError("invalid pooling extents");
    g.out_dims[a] = (in_dims[a] + window[a] - 1) / window[a];
  }
  return g;
}

namespace reference {

namespace {

std::size_t idx5(const Triple& dims, int c, int z, int y, int x) {
  return ((static_cast<std::size_t>(c) * dims[0] + z) * dims[1] + y) * dims[2] + x;
}

}  // namespace

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                    std::span<const T> kernel, std::span<const T> bias, std::span<T> out) {
  const auto& k = g.kernel;
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = in.data() + n * g.in_item_size();
    T* dst = out.data() + n * g.out_item_size();
    for (int o = 0; o < g.out_channels; ++o) {
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          for (int ox = 0; ox < g.out_dims[2]; ++ox) {
            double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
            for (int c = 0; c < g.in_channels; ++c) {
              for (int kz = 0; kz < k[0]; ++kz) {
                const int iz = oz * g.stride[0] - g.pad_lo[0] + kz;
                if (iz < 0 || iz >= g.in_dims[0]) continue;
                for (int ky = 0; ky < k[1]; ++ky) {
                  const int iy = oy * g.stride[1] - g.pad_lo[1] + ky;
                  if (iy < 0 || iy >= g.in_dims[1]) continue;
                  for (int kx = 0; kx < k[2]; ++kx) {
                    const int ix = ox * g.stride[2] - g.pad_lo[2] + kx;
                    if (ix < 0 || ix >= g.in_dims[2]) continue;
                    const std::size_t w = idx5(k, o * g.in_channels + c, kz, ky, kx);
                    acc += static_cast<double>(kernel[w]) * src[idx5(g.in_dims, c, iz, iy, ix)];
                  }
                }
              }
            }
            dst[idx5(g.out_dims, o, oz, oy, ox)] = static_cast<T>(acc);
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::size_t batch, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), T(0));
  const auto& k = g.kernel;
  for (std::size_t n = 0; n < batch; ++n) {
    const T* go = grad_out.data() + n * g.out_item_size();
    T* gi = grad_in.data() + n * g.in_item_size();
    for (int o = 0; o < g.out_channels; ++o) {
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          for (int ox = 0; ox < g.out_dims[2]; ++ox) {
            const T gv = go[idx5(g.out_dims, o, oz, oy, ox)];
            for (int c = 0; c < g.in_channels; ++c) {
              for (int kz = 0; kz < k[0]; ++kz) {
                const int iz = oz * g.stride[0] - g.pad_lo[0] + kz;
                if (iz < 0 || iz >= g.in_dims[0]) continue;
                for (int ky = 0; ky < k[1]; ++ky) {
                  const int iy = oy * g.stride[1] - g.pad_lo[1] + ky;
                  if (iy < 0 || iy >= g.in_dims[1]) continue;
                  for (int kx = 0; kx < k[2]; ++kx) {
                    const int ix = ox * g.stride[2] - g.pad_lo[2] + kx;
                    if (ix < 0 || ix >= g.in_dims[2]) continue;
                    gi[idx5(g.in_dims, c, iz, iy, ix)] +=
                        gv * kernel[idx5(k, o * g.in_channels + c, kz, ky, kx)];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_kernel,
                            std::span<T> grad_bias) {
  std::fill(grad_kernel.begin(), grad_kernel.end(), T(0));
  std::fill(grad_bias.begin(), grad_bias.end(), T(0));
  const auto& k = g.kernel;
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = in.data() + n * g.in_item_size();
    const T* go = grad_out.data() + n * g.out_item_size();
    for (int o = 0; o < g.out_channels; ++o) {
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          for (int ox = 0; ox < g.out_dims[2]; ++ox) {
            const T gv = go[idx5(g.out_dims, o, oz, oy, ox)];
            if (!grad_bias.empty()) grad_bias[o] += gv;
            for (int c = 0; c < g.in_channels; ++c) {
              for (int kz = 0; kz < k[0]; ++kz) {
                const int iz = oz * g.stride[0] - g.pad_lo[0] + kz;
                if (iz < 0 || iz >= g.in_dims[0]) continue;
                for (int ky = 0; ky < k[1]; ++ky) {
                  const int iy = oy * g.stride[1] - g.pad_lo[1] + ky;
                  if (iy < 0 || iy >= g.in_dims[1]) continue;
                  for (int kx = 0; kx < k[2]; ++kx) {
                    const int ix = ox * g.stride[2] - g.pad_lo[2] + kx;
                    if (ix < 0 || ix >= g.in_dims[2]) continue;
                    grad_kernel[idx5(k, o * g.in_channels + c, kz, ky, kx)] +=
                        gv * src[idx5(g.in_dims, c, iz, iy, ix)];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool3d_forward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                       std::span<T> out) {
  const std::size_t in_item = static_cast<std::size_t>(g.channels) * ConvGeometry::volume(g.in_dims);
  const std::size_t out_item =
      static_cast<std::size_t>(g.channels) * ConvGeometry::volume(g.out_dims);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = in.data() + n * in_item;
    T* dst = out.data() + n * out_item;
    for (int c = 0; c < g.channels; ++c) {
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          for (int ox = 0; ox < g.out_dims[2]; ++ox) {
            T best = -std::numeric_limits<T>::infinity();
            for (int z = oz * g.window[0]; z < std::min((oz + 1) * g.window[0], g.in_dims[0]); ++z) {
              for (int y = oy * g.window[1]; y < std::min((oy + 1) * g.window[1], g.in_dims[1]); ++y) {
                for (int x = ox * g.window[2]; x < std::min((ox + 1) * g.window[2], g.in_dims[2]);
                     ++x) {
                  best = std::max(best, src[idx5(g.in_dims, c, z, y, x)]);
                }
              }
            }
            dst[idx5(g.out_dims, c, oz, oy, ox)] = best;
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool3d_backward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                        std::span<const T> grad_out, std::span<T> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), T(0));
  const std::size_t in_item = static_cast<std::size_t>(g.channels) * ConvGeometry::volume(g.in_dims);
  const std::size_t out_item =
      static_cast<std::size_t>(g.channels) * ConvGeometry::volume(g.out_dims);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* src = in.data() + n * in_item;
    const T* go = grad_out.data() + n * out_item;
    T* gi = grad_in.data() + n * in_item;
    for (int c = 0; c < g.channels; ++c) {
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          for (int ox = 0; ox < g.out_dims[2]; ++ox) {
            // First maximum in scan order receives the gradient.
            std::size_t arg = 0;
            T best = -std::numeric_limits<T>::infinity();
            bool found = false;
            for (int z = oz * g.window[0]; z < std::min((oz + 1) * g.window[0], g.in_dims[0]); ++z) {
              for (int y = oy * g.window[1]; y < std::min((oy + 1) * g.window[1], g.in_dims[1]); ++y) {
                for (int x = ox * g.window[2]; x < std::min((ox + 1) * g.window[2], g.in_dims[2]);
                     ++x) {
                  const std::size_t i = idx5(g.in_dims, c, z, y, x);
                  if (!found || src[i] > best) {
                    best = src[i];
                    arg = i;
                    found = true;
                  }
                }
              }
            }
            gi[arg] += go[idx5(g.out_dims, c, oz, oy, ox)];
          }
        }
      }
    }
  }
}

#define DESCNET_INSTANTIATE_REFERENCE(T)                                                         \
  template void conv3d_forward<T>(const ConvGeometry&, std::size_t, std::span<const T>,          \
                                  std::span<const T>, std::span<const T>, std::span<T>);         \
  template void conv3d_backward_input<T>(const ConvGeometry&, std::size_t, std::span<const T>,   \
                                         std::span<const T>, std::span<T>);                      \
  template void conv3d_backward_params<T>(const ConvGeometry&, std::size_t, std::span<const T>,  \
                                          std::span<const T>, std::span<T>, std::span<T>);       \
  template void maxpool3d_forward<T>(const PoolGeometry&, std::size_t, std::span<const T>,       \
                                     std::span<T>);                                              \
  template void maxpool3d_backward<T>(const PoolGeometry&, std::size_t, std::span<const T>,      \
                                      std::span<const T>, std::span<T>);

DESCNET_INSTANTIATE_REFERENCE(float)
DESCNET_INSTANTIATE_REFERENCE(double)

}  // namespace reference
}  // namespace descnet::kernels
