#include "descnet/obj_export.hpp"

#include <array>
#include <map>
#include <sstream>

#include "descnet/byte_io.hpp"

namespace descnet {

namespace {

struct Face {
  std::array<int, 3> normal;
  // Corner offsets (x, y, z) in counter-clockwise order seen from outside.
  std::array<std::array<int, 3>, 4> corners;
};

const std::array<Face, 6> kFaces{{
    {{-1, 0, 0}, {{{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}}},
    {{1, 0, 0}, {{{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}}},
    {{0, -1, 0}, {{{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}}},
    {{0, 1, 0}, {{{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}}},
    {{0, 0, -1}, {{{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}}},
    {{0, 0, 1}, {{{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}}},
}};

}  // namespace

std::string voxels_to_obj(const VoxelGrid& grid, ObjStats* stats) {
  grid.validate();
  const auto D = static_cast<long>(grid.dims[0]);
  const auto H = static_cast<long>(grid.dims[1]);
  const auto W = static_cast<long>(grid.dims[2]);
  auto occupied = [&](long z, long y, long x) {
    if (z < 0 || y < 0 || x < 0 || z >= D || y >= H || x >= W) return false;
    return grid.at(static_cast<std::size_t>(z), static_cast<std::size_t>(y),
                   static_cast<std::size_t>(x)) != 0;
  };

  std::map<std::array<long, 3>, std::size_t> index;
  std::vector<std::array<long, 3>> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
  auto vertex = [&](std::array<long, 3> v) {
    auto [it, inserted] = index.emplace(v, vertices.size() + 1);
    if (inserted) vertices.push_back(v);
    return it->second;
  };

  for (long z = 0; z < D; ++z) {
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        if (!occupied(z, y, x)) continue;
        for (const auto& f : kFaces) {
          if (occupied(z + f.normal[2], y + f.normal[1], x + f.normal[0])) continue;
          std::array<std::size_t, 4> q{};
          for (int c = 0; c < 4; ++c) {
            q[c] = vertex({x + f.corners[c][0], y + f.corners[c][1], z + f.corners[c][2]});
          }
          triangles.push_back({q[0], q[1], q[2]});
          triangles.push_back({q[0], q[2], q[3]});
        }
      }
    }
  }

  std::ostringstream out;
  out << "# voxel mesh " << W << "x" << H << "x" << D << "\n";
  for (const auto& v : vertices) out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << "\n";
  for (const auto& t : triangles) out << "f " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  if (stats) *stats = {vertices.size(), triangles.size()};
  return out.str();
}

ObjStats export_obj(const std::filesystem::path& path, const VoxelGrid& grid) {
  ObjStats stats;
  write_file_atomic(path, voxels_to_obj(grid, &stats));
  return stats;
}

}  // namespace descnet
