#pragma once

#include <string>
#include <vector>

#include "descnet/rng.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

enum class ShapeFamily { Cuboid = 0, Ellipsoid = 1, LBracket = 2 };

std::string to_string(ShapeFamily f);
ShapeFamily parse_shape_family(const std::string& name);

/// Parameters of a desk-scale synthetic shape family. Extents are voxel counts
/// per axis drawn uniformly from [min_extent, max_extent]; positions are drawn
/// uniformly so the shape stays inside the grid, unless `centered`.
struct SyntheticShapeSpec {
  ShapeFamily family = ShapeFamily::Cuboid;
  std::size_t grid = 16;
  std::size_t min_extent = 5;
  std::size_t max_extent = 10;
  bool centered = false;
};

/// Sampled geometry of one shape, kept for counting oracles.
struct ShapeParams {
  Dims3 extent{};
  Dims3 origin{};
};

VoxelGrid make_shape(const SyntheticShapeSpec& spec, Rng& rng, ShapeParams* params = nullptr);

/// `count` labeled grids (label = family index), reproducible from `rng`.
std::vector<VoxelGrid> make_synthetic_dataset(const SyntheticShapeSpec& spec, std::size_t count,
                                              Rng& rng);

/// True when the occupied voxels form one 6-connected component.
bool is_connected(const VoxelGrid& grid);

}  // namespace descnet
