#include "descnet/synthetic.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace descnet {

std::string to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Cuboid: return "cuboid";
    case ShapeFamily::Ellipsoid: return "ellipsoid";
    case ShapeFamily::LBracket: return "lbracket";
  }
  return "unknown";
}

ShapeFamily parse_shape_family(const std::string& name) {
  if (name == "cuboid") return ShapeFamily::Cuboid;
  if (name == "ellipsoid") return ShapeFamily::Ellipsoid;
  if (name == "lbracket" || name == "l-bracket") return ShapeFamily::LBracket;
  throw std::invalid_argument("unknown shape family '" + name + "'");
}

VoxelGrid make_shape(const SyntheticShapeSpec& spec, Rng& rng, ShapeParams* params) {
  if (spec.grid == 0 || spec.min_extent == 0 || spec.min_extent > spec.max_extent ||
      spec.max_extent > spec.grid) {
    throw std::invalid_argument("synthetic shape extents must satisfy 1 <= min <= max <= grid");
  }
  ShapeParams p;
  for (int a = 0; a < 3; ++a) {
    std::size_t e = spec.min_extent + rng.below(spec.max_extent - spec.min_extent + 1);
    if (spec.centered && (spec.grid - e) % 2 != 0) e = (e > spec.min_extent) ? e - 1 : e + 1;
    e = std::min(e, spec.grid);
    p.extent[a] = e;
    p.origin[a] = spec.centered ? (spec.grid - e) / 2 : rng.below(spec.grid - e + 1);
  }
  VoxelGrid g({spec.grid, spec.grid, spec.grid});
  g.label = static_cast<int>(spec.family);
  const auto& e = p.extent;
  const auto& o = p.origin;
  for (std::size_t z = 0; z < e[0]; ++z) {
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (std::size_t x = 0; x < e[2]; ++x) {
        bool inside = false;
        switch (spec.family) {
          case ShapeFamily::Cuboid:
            inside = true;
            break;
          case ShapeFamily::Ellipsoid: {
            // Centre at the middle of the box, semi-axes of half the extent.
            const double dz = (z - (e[0] - 1) / 2.0) / (e[0] / 2.0);
            const double dy = (y - (e[1] - 1) / 2.0) / (e[1] / 2.0);
            const double dx = (x - (e[2] - 1) / 2.0) / (e[2] / 2.0);
            inside = dz * dz + dy * dy + dx * dx <= 1.0;
            break;
          }
          case ShapeFamily::LBracket: {
            const std::size_t base = std::max<std::size_t>(1, e[0] / 3);
            const std::size_t arm = std::max<std::size_t>(1, e[2] / 3);
            inside = z < base || x < arm;
            break;
          }
        }
        if (inside) g.set(o[0] + z, o[1] + y, o[2] + x, true);
      }
    }
  }
  if (params) *params = p;
  return g;
}

std::vector<VoxelGrid> make_synthetic_dataset(const SyntheticShapeSpec& spec, std::size_t count,
                                              Rng& rng) {
  std::vector<VoxelGrid> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_shape(spec, rng));
  return out;
}

bool is_connected(const VoxelGrid& g) {
  const std::size_t total = g.count();
  if (total == 0) return true;
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.occupancy[i]) {
      stack.push_back(i);
      seen[i] = 1;
      break;
    }
  }
  std::size_t reached = 0;
  const auto D = g.dims[0], H = g.dims[1], W = g.dims[2];
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++reached;
    const std::size_t z = i / (H * W), y = (i / W) % H, x = i % W;
    auto visit = [&](std::size_t zz, std::size_t yy, std::size_t xx) {
      const std::size_t j = g.index(zz, yy, xx);
      if (g.occupancy[j] && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    };
    if (z > 0) visit(z - 1, y, x);
    if (z + 1 < D) visit(z + 1, y, x);
    if (y > 0) visit(z, y - 1, x);
    if (y + 1 < H) visit(z, y + 1, x);
    if (x > 0) visit(z, y, x - 1);
    if (x + 1 < W) visit(z, y, x + 1);
  }
  return reached == total;
}

}  // namespace descnet
