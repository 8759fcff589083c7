#include "descnet/resample.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace descnet {

void check_downscale_factor(const Shape& shape, int factor) {
  if (shape.size() != 5) throw ShapeError("resampling expects [N,C,D,H,W], got " + shape_str(shape));
  if (factor <= 0) throw std::invalid_argument("down-scale factor must be positive");
  for (std::size_t a = 2; a < 5; ++a) {
    if (shape[a] % static_cast<std::size_t>(factor) != 0) {
      throw std::invalid_argument("extent " + std::to_string(shape[a]) +
                                  " is not divisible by down-scale factor " + std::to_string(factor));
    }
  }
}

template <typename T>
BasicTensor<T> downscale(const BasicTensor<T>& high, int factor) {
  check_downscale_factor(high.shape(), factor);
  const auto f = static_cast<std::size_t>(factor);
  const auto& s = high.shape();
  const std::size_t D = s[2], H = s[3], W = s[4];
  const std::size_t d = D / f, h = H / f, w = W / f;
  BasicTensor<T> low({s[0], s[1], d, h, w});
  const std::size_t planes = s[0] * s[1];
  // Extended precision keeps block sums of equal values exact, so C C- = I
  // holds bit-exactly for float and double grids.
  std::vector<long double> acc(d * h * w);
  const long double cells = static_cast<long double>(f * f * f);
  for (std::size_t p = 0; p < planes; ++p) {
    std::fill(acc.begin(), acc.end(), 0.0L);
    const T* src = high.data() + p * D * H * W;
    for (std::size_t z = 0; z < D; ++z) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          acc[((z / f) * h + y / f) * w + x / f] += src[(z * H + y) * W + x];
        }
      }
    }
    T* dst = low.data() + p * d * h * w;
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<T>(acc[i] / cells);
  }
  return low;
}

template <typename T>
BasicTensor<T> upscale(const BasicTensor<T>& low, int factor) {
  if (low.rank() != 5) throw ShapeError("upscale expects [N,C,D,H,W]");
  if (factor <= 0) throw std::invalid_argument("up-scale factor must be positive");
  const auto f = static_cast<std::size_t>(factor);
  const auto& s = low.shape();
  const std::size_t d = s[2], h = s[3], w = s[4];
  const std::size_t D = d * f, H = h * f, W = w * f;
  BasicTensor<T> high({s[0], s[1], D, H, W});
  const std::size_t planes = s[0] * s[1];
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = low.data() + p * d * h * w;
    T* dst = high.data() + p * D * H * W;
    for (std::size_t z = 0; z < D; ++z) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          dst[(z * H + y) * W + x] = src[((z / f) * h + y / f) * w + x / f];
        }
      }
    }
  }
  return high;
}

template <typename T>
BasicTensor<T> project_nullspace(const BasicTensor<T>& delta, int factor) {
  BasicTensor<T> out = delta;
  out -= upscale(downscale(delta, factor), factor);
  return out;
}

Tensor downscale(const VoxelGrid& grid, int factor) {
  return downscale(to_tensor(grid), factor);
}

template BasicTensor<float> downscale(const BasicTensor<float>&, int);
template BasicTensor<double> downscale(const BasicTensor<double>&, int);
template BasicTensor<float> upscale(const BasicTensor<float>&, int);
template BasicTensor<double> upscale(const BasicTensor<double>&, int);
template BasicTensor<float> project_nullspace(const BasicTensor<float>&, int);
template BasicTensor<double> project_nullspace(const BasicTensor<double>&, int);

}  // namespace descnet
