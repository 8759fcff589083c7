#include <Eigen/Core>
#include <algorithm>
#include <limits>
#include <vector>

#include "descnet/kernels.hpp"

namespace descnet::kernels::parallel {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapConst = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using Map = Eigen::Map<RowMatrix<T>>;

// col is [patch_size, out_volume]; row r = ((c * kz + z) * ky + y) * kx + x.
template <typename T>
void im2col(const ConvGeometry& g, const T* src, T* col) {
  const auto& k = g.kernel;
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(g.patch_size());
  const std::size_t cols = g.out_volume();
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    int rem = static_cast<int>(r);
    const int kx = rem % k[2];
    rem /= k[2];
    const int ky = rem % k[1];
    rem /= k[1];
    const int kz = rem % k[0];
    const int c = rem / k[0];
    const T* plane = src + static_cast<std::size_t>(c) * g.in_volume();
    T* out = col + static_cast<std::size_t>(r) * cols;
    for (int oz = 0; oz < g.out_dims[0]; ++oz) {
      const int iz = oz * g.stride[0] - g.pad_lo[0] + kz;
      const bool zin = iz >= 0 && iz < g.in_dims[0];
      for (int oy = 0; oy < g.out_dims[1]; ++oy) {
        const int iy = oy * g.stride[1] - g.pad_lo[1] + ky;
        const bool yin = zin && iy >= 0 && iy < g.in_dims[1];
        const T* line = yin ? plane + (static_cast<std::size_t>(iz) * g.in_dims[1] + iy) * g.in_dims[2]
                            : nullptr;
        for (int ox = 0; ox < g.out_dims[2]; ++ox) {
          const int ix = ox * g.stride[2] - g.pad_lo[2] + kx;
          *out++ = (yin && ix >= 0 && ix < g.in_dims[2]) ? line[ix] : T(0);
        }
      }
    }
  }
}

// Scatter-adds col back into dst; rows sharing an input channel are applied
// in row order, so the result is deterministic.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* dst) {
  const auto& k = g.kernel;
  const std::size_t cols = g.out_volume();
  const std::size_t kvol = g.kernel_volume();
  std::fill(dst, dst + g.in_item_size(), T(0));
  for (int c = 0; c < g.in_channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * g.in_volume();
    for (std::size_t kr = 0; kr < kvol; ++kr) {
      int rem = static_cast<int>(kr);
      const int kx = rem % k[2];
      rem /= k[2];
      const int ky = rem % k[1];
      const int kz = rem / k[1];
      const T* in = col + (static_cast<std::size_t>(c) * kvol + kr) * cols;
      for (int oz = 0; oz < g.out_dims[0]; ++oz) {
        const int iz = oz * g.stride[0] - g.pad_lo[0] + kz;
        const bool zin = iz >= 0 && iz < g.in_dims[0];
        for (int oy = 0; oy < g.out_dims[1]; ++oy) {
          const int iy = oy * g.stride[1] - g.pad_lo[1] + ky;
          if (!zin || iy < 0 || iy >= g.in_dims[1]) {
            in += g.out_dims[2];
            continue;
          }
          T* line = plane + (static_cast<std::size_t>(iz) * g.in_dims[1] + iy) * g.in_dims[2];
          for (int ox = 0; ox < g.out_dims[2]; ++ox, ++in) {
            const int ix = ox * g.stride[2] - g.pad_lo[2] + kx;
            if (ix >= 0 && ix < g.in_dims[2]) line[ix] += *in;
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                    std::span<const T> kernel, std::span<const T> bias, std::span<T> out) {
  const auto K = static_cast<Eigen::Index>(g.patch_size());
  const auto P = static_cast<Eigen::Index>(g.out_volume());
  const auto Co = static_cast<Eigen::Index>(g.out_channels);
  MapConst<T> w(kernel.data(), Co, K);
  const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(K * P));
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < nb; ++n) {
      im2col(g, in.data() + n * g.in_item_size(), col.data());
      Map<T> y(out.data() + n * g.out_item_size(), Co, P);
      y.noalias() = w * MapConst<T>(col.data(), K, P);
      if (!bias.empty()) {
        for (Eigen::Index o = 0; o < Co; ++o) y.row(o).array() += bias[o];
      }
    }
  }
}

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::size_t batch, std::span<const T> grad_out,
                           std::span<const T> kernel, std::span<T> grad_in) {
  const auto K = static_cast<Eigen::Index>(g.patch_size());
  const auto P = static_cast<Eigen::Index>(g.out_volume());
  const auto Co = static_cast<Eigen::Index>(g.out_channels);
  MapConst<T> w(kernel.data(), Co, K);
  const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel
  {
    RowMatrix<T> col(K, P);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < nb; ++n) {
      MapConst<T> gy(grad_out.data() + n * g.out_item_size(), Co, P);
      col.noalias() = w.transpose() * gy;
      col2im(g, col.data(), grad_in.data() + n * g.in_item_size());
    }
  }
}

template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::size_t batch, std::span<const T> in,
                            std::span<const T> grad_out, std::span<T> grad_kernel,
                            std::span<T> grad_bias) {
  const auto K = static_cast<Eigen::Index>(g.patch_size());
  const auto P = static_cast<Eigen::Index>(g.out_volume());
  const auto Co = static_cast<Eigen::Index>(g.out_channels);
  Map<T> gw(grad_kernel.data(), Co, K);
  gw.setZero();
  std::fill(grad_bias.begin(), grad_bias.end(), T(0));
  std::vector<T> col(static_cast<std::size_t>(K * P));
  // Items are folded in order; only the GEMM operands are built per item.
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(g, in.data() + n * g.in_item_size(), col.data());
    MapConst<T> gy(grad_out.data() + n * g.out_item_size(), Co, P);
    gw.noalias() += gy * MapConst<T>(col.data(), K, P).transpose();
    if (!grad_bias.empty()) {
      // Plain loops: Eigen reductions peel by address alignment, which would make
      // the sum depend on where the buffer happens to live.
      for (Eigen::Index o = 0; o < Co; ++o) {
        T acc = 0;
        for (Eigen::Index p = 0; p < P; ++p) acc += gy(o, p);
        grad_bias[o] += acc;
      }
    }
  }
}

template <typename T>
void maxpool3d_forward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                       std::span<T> out) {
  const std::size_t in_vol = ConvGeometry::volume(g.in_dims);
  const std::size_t out_vol = ConvGeometry::volume(g.out_dims);
  const std::ptrdiff_t planes = static_cast<std::ptrdiff_t>(batch) * g.channels;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const T* src = in.data() + p * in_vol;
    T* dst = out.data() + p * out_vol;
    std::fill(dst, dst + out_vol, -std::numeric_limits<T>::infinity());
    for (int z = 0; z < g.in_dims[0]; ++z) {
      const int oz = z / g.window[0];
      for (int y = 0; y < g.in_dims[1]; ++y) {
        const int oy = y / g.window[1];
        T* orow = dst + (static_cast<std::size_t>(oz) * g.out_dims[1] + oy) * g.out_dims[2];
        const T* irow = src + (static_cast<std::size_t>(z) * g.in_dims[1] + y) * g.in_dims[2];
        for (int x = 0; x < g.in_dims[2]; ++x) {
          T& cell = orow[x / g.window[2]];
          cell = std::max(cell, irow[x]);
        }
      }
    }
  }
}

template <typename T>
void maxpool3d_backward(const PoolGeometry& g, std::size_t batch, std::span<const T> in,
                        std::span<const T> grad_out, std::span<T> grad_in) {
  const std::size_t in_vol = ConvGeometry::volume(g.in_dims);
  const std::size_t out_vol = ConvGeometry::volume(g.out_dims);
  const std::ptrdiff_t planes = static_cast<std::ptrdiff_t>(batch) * g.channels;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const T* src = in.data() + p * in_vol;
    const T* go = grad_out.data() + p * out_vol;
    T* gi = grad_in.data() + p * in_vol;
    std::fill(gi, gi + in_vol, T(0));
    // Argmax per window, first maximum in scan order (matches the reference).
    std::vector<std::size_t> arg(out_vol, 0);
    std::vector<char> seen(out_vol, 0);
    for (int z = 0; z < g.in_dims[0]; ++z) {
      for (int y = 0; y < g.in_dims[1]; ++y) {
        for (int x = 0; x < g.in_dims[2]; ++x) {
          const std::size_t o =
              (static_cast<std::size_t>(z / g.window[0]) * g.out_dims[1] + y / g.window[1]) *
                  g.out_dims[2] +
              x / g.window[2];
          const std::size_t i = (static_cast<std::size_t>(z) * g.in_dims[1] + y) * g.in_dims[2] + x;
          if (!seen[o] || src[i] > src[arg[o]]) {
            arg[o] = i;
            seen[o] = 1;
          }
        }
      }
    }
    for (std::size_t o = 0; o < out_vol; ++o) gi[arg[o]] += go[o];
  }
}

template <typename T>
void dense_forward(std::size_t batch, std::size_t rows, std::size_t cols, std::span<const T> in,
                   std::span<const T> weight, std::span<const T> bias, std::span<T> out) {
  const auto B = static_cast<Eigen::Index>(batch);
  const auto R = static_cast<Eigen::Index>(rows);
  const auto C = static_cast<Eigen::Index>(cols);
  Map<T> y(out.data(), B, R);
  y.noalias() = MapConst<T>(in.data(), B, C) * MapConst<T>(weight.data(), R, C).transpose();
  if (!bias.empty()) {
    for (Eigen::Index b = 0; b < B; ++b) {
      for (Eigen::Index r = 0; r < R; ++r) y(b, r) += bias[static_cast<std::size_t>(r)];
    }
  }
}

template <typename T>
void dense_backward_input(std::size_t batch, std::size_t rows, std::size_t cols,
                          std::span<const T> grad_out, std::span<const T> weight,
                          std::span<T> grad_in) {
  const auto B = static_cast<Eigen::Index>(batch);
  const auto R = static_cast<Eigen::Index>(rows);
  const auto C = static_cast<Eigen::Index>(cols);
  Map<T>(grad_in.data(), B, C).noalias() =
      MapConst<T>(grad_out.data(), B, R) * MapConst<T>(weight.data(), R, C);
}

template <typename T>
void dense_backward_params(std::size_t batch, std::size_t rows, std::size_t cols,
                           std::span<const T> in, std::span<const T> grad_out,
                           std::span<T> grad_weight, std::span<T> grad_bias) {
  const auto B = static_cast<Eigen::Index>(batch);
  const auto R = static_cast<Eigen::Index>(rows);
  const auto C = static_cast<Eigen::Index>(cols);
  MapConst<T> gy(grad_out.data(), B, R);
  Map<T>(grad_weight.data(), R, C).noalias() = gy.transpose() * MapConst<T>(in.data(), B, C);
  if (!grad_bias.empty()) {
    for (Eigen::Index r = 0; r < R; ++r) {
      T acc = 0;
      for (Eigen::Index b = 0; b < B; ++b) acc += gy(b, r);
      grad_bias[static_cast<std::size_t>(r)] = acc;
    }
  }
}

#define DESCNET_INSTANTIATE_PARALLEL(T)                                                          \
  template void conv3d_forward<T>(const ConvGeometry&, std::size_t, std::span<const T>,          \
                                  std::span<const T>, std::span<const T>, std::span<T>);         \
  template void conv3d_backward_input<T>(const ConvGeometry&, std::size_t, std::span<const T>,   \
                                         std::span<const T>, std::span<T>);                      \
  template void conv3d_backward_params<T>(const ConvGeometry&, std::size_t, std::span<const T>,  \
                                          std::span<const T>, std::span<T>, std::span<T>);       \
  template void maxpool3d_forward<T>(const PoolGeometry&, std::size_t, std::span<const T>,       \
                                     std::span<T>);                                              \
  template void maxpool3d_backward<T>(const PoolGeometry&, std::size_t, std::span<const T>,      \
                                      std::span<const T>, std::span<T>);                         \
  template void dense_forward<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,      \
                                 std::span<const T>, std::span<const T>, std::span<T>);          \
  template void dense_backward_input<T>(std::size_t, std::size_t, std::size_t,                   \
                                        std::span<const T>, std::span<const T>, std::span<T>);   \
  template void dense_backward_params<T>(std::size_t, std::size_t, std::size_t,                  \
                                         std::span<const T>, std::span<const T>, std::span<T>,   \
                                         std::span<T>);

DESCNET_INSTANTIATE_PARALLEL(float)
DESCNET_INSTANTIATE_PARALLEL(double)

}  // namespace descnet::kernels::parallel
