#pragma once

// Block down-scaling C, its pseudo-inverse C- (constant-block expansion) and
// the null-space projector I - C- C, on [N, C, D, H, W] tensors.
//
// C averages every d x d x d block, so C C- = I on low-resolution grids and
// I - C- C subtracts each block's mean.

#include "descnet/tensor.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

template <typename T>
BasicTensor<T> downscale(const BasicTensor<T>& high, int factor);

template <typename T>
BasicTensor<T> upscale(const BasicTensor<T>& low, int factor);

template <typename T>
BasicTensor<T> project_nullspace(const BasicTensor<T>& delta, int factor);

/// Block means of a raw occupancy grid as a [1, 1, D/d, H/d, W/d] tensor.
Tensor downscale(const VoxelGrid& grid, int factor);

/// Throws unless every spatial extent of `shape` is divisible by `factor`.
void check_downscale_factor(const Shape& shape, int factor);

}  // namespace descnet
