#pragma once

#include <filesystem>
#include <string>

#include "descnet/voxel_grid.hpp"

namespace descnet {

struct ObjStats {
  std::size_t vertices = 0;
  std::size_t triangles = 0;
};

/// ASCII Wavefront OBJ with one unit cube per occupied voxel. Faces shared by
/// two occupied voxels are dropped and corner vertices are shared, so a single
/// voxel gives 8 vertices and 12 triangles. Voxel (z, y, x) spans
/// [x, x+1] x [y, y+1] x [z, z+1].
std::string voxels_to_obj(const VoxelGrid& grid, ObjStats* stats = nullptr);

ObjStats export_obj(const std::filesystem::path& path, const VoxelGrid& grid);

}  // namespace descnet
