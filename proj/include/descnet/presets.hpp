#pragma once

#include <string>
#include <vector>

#include "descnet/networks.hpp"

namespace descnet {

/// One strided convolution of a descriptor stack, followed by ReLU.
struct ConvSpec {
  int filters = 1;
  int kernel = 3;
  int stride = 1;
};

/// Convolutions with "same"-style zero padding (output extent = ceil(in / stride)),
/// each followed by ReLU, then a fully-connected single-output head.
struct DescriptorArchitecture {
  int grid = 32;
  int in_channels = 1;
  std::vector<ConvSpec> convs;
};

struct DeconvSpec {
  int channels = 1;
  int kernel = 4;
  int upsample = 2;
};

/// FC stem to [stem_channels, base, base, base], then Deconv3D layers with
/// BatchNorm + ReLU between them and Tanh after the last one.
struct GeneratorArchitecture {
  std::size_t latent_dim = 100;
  int stem_channels = 256;
  int base_extent = 4;
  std::vector<DeconvSpec> deconvs;
};

enum class PresetName { Synthesis3, Superres2, Coop4Descriptor, CoopGenerator };

std::string to_string(PresetName name);
PresetName parse_preset_name(const std::string& name);

/// Padding (lo, hi) giving output extent ceil(in / stride).
std::pair<int, int> same_padding(int in, int kernel, int stride);

DescriptorArchitecture descriptor_architecture(PresetName name, int grid);
GeneratorArchitecture generator_architecture(PresetName name, int grid);

/// Parses "filters:kernel:stride,..." into conv specs.
std::vector<ConvSpec> parse_conv_specs(const std::string& text);
/// Parses "channels:kernel:upsample,..." into deconv specs.
std::vector<DeconvSpec> parse_deconv_specs(const std::string& text);

/// Builds an uninitialised (all-zero) descriptor for the architecture.
template <typename T>
DescriptorNet<T> build_descriptor(const DescriptorArchitecture& arch);

template <typename T>
GeneratorNet<T> build_generator(const GeneratorArchitecture& arch);

}  // namespace descnet
