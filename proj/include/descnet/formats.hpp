#pragma once

// File formats for voxel data.
//
// VOX1 container (all integers little-endian):
//
//   header   "VOX1" | u32 version (=1) | u32 record_count
//   record   u8  payload      0 = bit-packed occupancy, 1 = float32 values
//            u8  preprocessing (0 none, 1 mean-centered, 2 scaled to [-1,1])
//            u16 reserved (=0)
//            i32 label (-1 when unlabeled)
//            f32 preprocessing mean
//            u32 rank | u32 dims[rank]
//            payload: occupancy packs cell i into bit (i % 8) of byte i / 8,
//                     ceil(prod(dims) / 8) bytes, padding bits zero;
//                     float32 payload is prod(dims) IEEE-754 values.
//
// Occupancy records are rank 3 (D, H, W). Float records carry any tensor
// shape, e.g. a [N, 1, D, H, W] batch of chain states.

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "descnet/byte_io.hpp"
#include "descnet/voxel_grid.hpp"

namespace descnet {

inline constexpr std::uint32_t kVoxVersion = 1;
/// Bytes of the file header plus one rank-3 record header.
inline constexpr std::size_t kVoxGridOverhead = 12 + 12 + 4 + 3 * 4;

struct TensorRecord {
  Tensor tensor;
  PreprocessingInfo preprocessing;
  int label = -1;
};

using VoxRecord = std::variant<VoxelGrid, TensorRecord>;

std::vector<std::uint8_t> write_native(std::span<const VoxRecord> records);
std::vector<VoxRecord> read_native(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_native(const VoxelGrid& grid);
std::vector<std::uint8_t> write_native(const TensorRecord& tensor);
std::vector<std::uint8_t> write_native_grids(std::span<const VoxelGrid> grids);

/// Every record must be an occupancy grid.
std::vector<VoxelGrid> read_native_grids(std::span<const std::uint8_t> bytes);
/// Exactly one float record.
TensorRecord read_native_tensor(std::span<const std::uint8_t> bytes);

void save_grids(const std::filesystem::path& path, std::span<const VoxelGrid> grids);
std::vector<VoxelGrid> load_grids(const std::filesystem::path& path);
void save_tensor(const std::filesystem::path& path, const TensorRecord& tensor);
TensorRecord load_tensor(const std::filesystem::path& path);

/// Parses a binvox file ("#binvox 1", dim/translate/scale, "data", then
/// (value, count) run-length pairs). Grid axes are binvox (x, y, z): the file
/// scans y fastest, then z, then x.
VoxelGrid read_binvox(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_binvox(const VoxelGrid& grid);

}  // namespace descnet
