#include "descnet/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace descnet {

std::size_t VoxelGrid::count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

void VoxelGrid::validate() const {
  if (occupancy.size() != dims[0] * dims[1] * dims[2]) {
    throw ShapeError("voxel grid payload does not match its dims");
  }
  for (auto v : occupancy) {
    if (v > 1) throw std::invalid_argument("voxel grid occupancy must be 0 or 1");
  }
}

float dataset_mean(std::span<const VoxelGrid> grids) {
  double occupied = 0, total = 0;
  for (const auto& g : grids) {
    occupied += static_cast<double>(g.count());
    total += static_cast<double>(g.size());
  }
  if (total == 0) throw std::invalid_argument("dataset mean of an empty dataset");
  return static_cast<float>(occupied / total);
}

namespace {

Shape item_shape(const VoxelGrid& g) {
  if (g.size() == 0) throw ShapeError("cannot convert a zero-extent grid to a tensor");
  return {1, 1, g.dims[0], g.dims[1], g.dims[2]};
}

Dims3 spatial_dims(const Tensor& t) {
  const auto& s = t.shape();
  if (s.size() < 3) throw ShapeError("expected a volumetric tensor, got " + shape_str(s));
  return {s[s.size() - 3], s[s.size() - 2], s[s.size() - 1]};
}

}  // namespace

Tensor to_tensor(const VoxelGrid& grid) {
  Tensor t(item_shape(grid));
  for (std::size_t i = 0; i < grid.size(); ++i) t[i] = grid.occupancy[i];
  return t;
}

Tensor center(const VoxelGrid& grid, float mean) {
  Tensor t = to_tensor(grid);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] -= mean;
  return t;
}

Tensor uncenter(const Tensor& t, float mean) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mean;
  return out;
}

Tensor scale_pm1(const VoxelGrid& grid) {
  Tensor t = to_tensor(grid);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 2.0f * t[i] - 1.0f;
  return t;
}

Tensor unscale_pm1(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] + 1.0f) * 0.5f;
  return out;
}

Tensor preprocess(const VoxelGrid& grid) {
  switch (grid.preprocessing.kind) {
    case Preprocessing::None: return to_tensor(grid);
    case Preprocessing::MeanCentered: return center(grid, grid.preprocessing.mean);
    case Preprocessing::ScaledPm1: return scale_pm1(grid);
  }
  throw std::invalid_argument("unknown preprocessing kind");
}

Tensor preprocess_batch(std::span<const VoxelGrid> grids) {
  if (grids.empty()) throw std::invalid_argument("empty dataset");
  std::vector<Tensor> items;
  items.reserve(grids.size());
  for (const auto& g : grids) items.push_back(preprocess(g));
  return Tensor::concat(items);
}

Tensor unpreprocess(const Tensor& t, const PreprocessingInfo& info) {
  switch (info.kind) {
    case Preprocessing::None: return t;
    case Preprocessing::MeanCentered: return uncenter(t, info.mean);
    case Preprocessing::ScaledPm1: return unscale_pm1(t);
  }
  throw std::invalid_argument("unknown preprocessing kind");
}

VoxelGrid binarize(std::span<const float> values, Dims3 dims, float threshold) {
  VoxelGrid g(dims);
  if (values.size() != g.size()) throw ShapeError("binarize: value count does not match dims");
  for (std::size_t i = 0; i < values.size(); ++i) g.occupancy[i] = values[i] >= threshold ? 1 : 0;
  return g;
}

VoxelGrid binarize(const Tensor& item, float threshold) {
  const Dims3 dims = spatial_dims(item);
  if (item.size() != dims[0] * dims[1] * dims[2]) {
    throw ShapeError("binarize expects a single-channel single item, got " + shape_str(item.shape()));
  }
  return binarize(item.span(), dims, threshold);
}

std::size_t CorruptionMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

CorruptedItem corrupt(const Tensor& item, double fraction, Rng& rng, CorruptionFill fill) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("corruption fraction must lie in [0, 1]");
  }
  const std::size_t n = item.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  CorruptedItem out{item, CorruptionMask{std::vector<std::uint8_t>(n, 0), fraction}};
  // Partial Fisher-Yates: the first k entries of `order` are the sample.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(order[i], order[j]);
    out.mask.cells[order[i]] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.mask.cells[i]) out.values[i] = static_cast<float>(fill.mean + fill.stddev * rng.normal());
  }
  return out;
}

VoxelGrid mask_grid(const CorruptionMask& mask, Dims3 dims) {
  VoxelGrid g(dims);
  if (g.size() != mask.size()) throw ShapeError("mask size does not match dims");
  g.occupancy = mask.cells;
  return g;
}

}  // namespace descnet
