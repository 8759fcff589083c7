#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "descnet/rng.hpp"
#include "descnet/tensor.hpp"

namespace descnet {

enum class Preprocessing : std::uint8_t {
  None = 0,
  MeanCentered = 1,  ///< value - mean
  ScaledPm1 = 2,     ///< 2 * value - 1, i.e. [0,1] -> [-1,1]
};

struct PreprocessingInfo {
  Preprocessing kind = Preprocessing::None;
  float mean = 0.0f;

  friend bool operator==(const PreprocessingInfo&, const PreprocessingInfo&) = default;
};

using Dims3 = std::array<std::size_t, 3>;

/// Binary occupancy grid, row-major over (D, H, W). Zero-extent grids are allowed.
struct VoxelGrid {
  Dims3 dims{0, 0, 0};
  std::vector<std::uint8_t> occupancy;
  PreprocessingInfo preprocessing;
  int label = -1;

  VoxelGrid() = default;
  explicit VoxelGrid(Dims3 d) : dims(d), occupancy(d[0] * d[1] * d[2], 0) {}

  std::size_t size() const { return occupancy.size(); }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * dims[1] + y) * dims[2] + x;
  }
  std::uint8_t at(std::size_t z, std::size_t y, std::size_t x) const { return occupancy[index(z, y, x)]; }
  void set(std::size_t z, std::size_t y, std::size_t x, bool v) { occupancy[index(z, y, x)] = v ? 1 : 0; }
  std::size_t count() const;
  /// Throws unless every cell is 0 or 1.
  void validate() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

/// Mean occupancy over all cells of all grids.
float dataset_mean(std::span<const VoxelGrid> grids);

/// Raw occupancy as a [1, 1, D, H, W] tensor.
Tensor to_tensor(const VoxelGrid& grid);
/// Applies the grid's own preprocessing record; [1, 1, D, H, W].
Tensor preprocess(const VoxelGrid& grid);
/// Stacks preprocessed grids into [N, 1, D, H, W].
Tensor preprocess_batch(std::span<const VoxelGrid> grids);
/// Inverse of the preprocessing back to occupancy space.
Tensor unpreprocess(const Tensor& t, const PreprocessingInfo& info);

Tensor center(const VoxelGrid& grid, float mean);
Tensor uncenter(const Tensor& t, float mean);
Tensor scale_pm1(const VoxelGrid& grid);
/// (t + 1) / 2, the exact affine inverse of scale_pm1.
Tensor unscale_pm1(const Tensor& t);

/// Occupancy = value >= threshold (a tie at the threshold is occupied).
/// `values` holds one item of D*H*W voxels.
VoxelGrid binarize(std::span<const float> values, Dims3 dims, float threshold = 0.5f);
VoxelGrid binarize(const Tensor& item, float threshold = 0.5f);

/// Voxels marked true are corrupted (free to be resampled).
struct CorruptionMask {
  std::vector<std::uint8_t> cells;
  double fraction = 0;

  std::size_t count() const;
  std::size_t size() const { return cells.size(); }
  bool any() const { return count() > 0; }
};

struct CorruptionFill {
  float mean = 0.0f;
  float stddev = 0.5f;
};

struct CorruptedItem {
  Tensor values;
  CorruptionMask mask;
};

/// Marks round(fraction * size) voxels uniformly without replacement and
/// replaces them by N(fill.mean, fill.stddev^2) draws. `item` is one
/// [1, C, D, H, W] (or any single-item) tensor; untouched voxels keep their bits.
CorruptedItem corrupt(const Tensor& item, double fraction, Rng& rng, CorruptionFill fill);

/// Converts a mask to a 0/1 grid.
VoxelGrid mask_grid(const CorruptionMask& mask, Dims3 dims);

}  // namespace descnet
