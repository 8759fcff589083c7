#pragma once

// Network checkpoint container "3DDN" (little-endian throughout):
//
//   "3DDN" | u32 version (=1) | u32 net kind (0 descriptor, 1 generator)
//   descriptor: f32 s | f32 temperature | u32 reference (0 gaussian, 1 uniform)
//   generator:  u32 latent_dim | f32 sigma
//   u32 rank | u32 dims[rank]       per-item input (descriptor) / output (generator) shape
//   u32 layer_count, then per layer:
//     u32 kind | i32 stride[3] | i32 pad_lo[3] | i32 pad_hi[3] | i32 window[3]
//     f32 momentum | f32 epsilon
//     u32 out_rank | u32 out_dims[out_rank]
//     u32 tensor_count, then tensors in order kernel, bias, running_mean, running_var:
//       u32 rank | u32 dims[rank] | f32 values[prod(dims)]
//
// Parameters are stored as float32, so float networks round-trip bit-exactly.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "descnet/byte_io.hpp"
#include "descnet/networks.hpp"

namespace descnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class NetKind : std::uint32_t { Descriptor = 0, Generator = 1 };

std::vector<std::uint8_t> encode_checkpoint(const DescriptorNet<float>& net);
std::vector<std::uint8_t> encode_checkpoint(const GeneratorNet<float>& net);

NetKind checkpoint_kind(std::span<const std::uint8_t> bytes);
DescriptorNet<float> decode_descriptor(std::span<const std::uint8_t> bytes);
GeneratorNet<float> decode_generator(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const DescriptorNet<float>& net);
void save_checkpoint(const std::filesystem::path& path, const GeneratorNet<float>& net);
DescriptorNet<float> load_descriptor(const std::filesystem::path& path);
GeneratorNet<float> load_generator(const std::filesystem::path& path);

}  // namespace descnet
