#include "descnet/presets.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

namespace descnet {

std::string to_string(PresetName name) {
  switch (name) {
    case PresetName::Synthesis3: return "synthesis3";
    case PresetName::Superres2: return "superres2";
    case PresetName::Coop4Descriptor: return "coop4_descriptor";
    case PresetName::CoopGenerator: return "coop_generator";
  }
  return "unknown";
}

PresetName parse_preset_name(const std::string& name) {
  if (name == "synthesis3") return PresetName::Synthesis3;
  if (name == "superres2") return PresetName::Superres2;
  if (name == "coop4_descriptor") return PresetName::Coop4Descriptor;
  if (name == "coop_generator") return PresetName::CoopGenerator;
  throw std::invalid_argument("unknown preset '" + name + "'");
}

std::pair<int, int> same_padding(int in, int kernel, int stride) {
  const int out = (in + stride - 1) / stride;
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return {total / 2, total - total / 2};
}

// Pads per preset at grid 32 (lo/hi):
//   synthesis3        conv 16^3/3: 7/7 -> 11^3, conv 6^3/2: 2/3 -> 6^3, FC 21600 -> 1
//   coop4_descriptor  conv 9^3/2: 3/4 -> 16^3, 7^3/2: 2/3 -> 8^3, 4^3/2: 1/1 -> 4^3, FC
// superres2 at grid 64: conv 16^3/3: 7/8 -> 22^3, FC.
DescriptorArchitecture descriptor_architecture(PresetName name, int grid) {
  DescriptorArchitecture a;
  a.grid = grid;
  switch (name) {
    case PresetName::Synthesis3:
      a.convs = {{200, 16, 3}, {100, 6, 2}};
      break;
    case PresetName::Superres2:
      a.convs = {{200, 16, 3}};
      break;
    case PresetName::Coop4Descriptor:
      a.convs = {{64, 9, 2}, {128, 7, 2}, {256, 4, 2}};
      break;
    case PresetName::CoopGenerator:
      throw std::invalid_argument("coop_generator is not a descriptor preset");
  }
  return a;
}

GeneratorArchitecture generator_architecture(PresetName name, int grid) {
  if (name != PresetName::CoopGenerator) {
    throw std::invalid_argument(to_string(name) + " is not a generator preset");
  }
  if (grid % 8 != 0) throw std::invalid_argument("generator grid must be a multiple of 8");
  GeneratorArchitecture a;
  a.latent_dim = 100;
  a.stem_channels = 256;
  a.base_extent = grid / 8;
  a.deconvs = {{256, 4, 1}, {128, 4, 2}, {64, 4, 2}, {1, 4, 2}};
  return a;
}

namespace {

/// Splits "a:b:c,..." into positive integer triples.
std::vector<std::array<int, 3>> parse_triples(const std::string& text, const char* expected) {
  std::vector<std::array<int, 3>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::array<int, 3> v{};
    char sep1 = 0, sep2 = 0;
    std::istringstream is(item);
    if (!(is >> v[0] >> sep1 >> v[1] >> sep2 >> v[2]) || sep1 != ':' || sep2 != ':' || v[0] <= 0 ||
        v[1] <= 0 || v[2] <= 0 || !(is >> std::ws).eof()) {
      throw std::invalid_argument("bad layer spec '" + item + "', expected " + expected);
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("layer spec list is empty");
  return out;
}

}  // namespace

std::vector<ConvSpec> parse_conv_specs(const std::string& text) {
  std::vector<ConvSpec> specs;
  for (const auto& [f, k, s] : parse_triples(text, "filters:kernel:stride")) specs.push_back({f, k, s});
  return specs;
}

std::vector<DeconvSpec> parse_deconv_specs(const std::string& text) {
  std::vector<DeconvSpec> specs;
  for (const auto& [c, k, u] : parse_triples(text, "channels:kernel:upsample")) specs.push_back({c, k, u});
  return specs;
}

template <typename T>
DescriptorNet<T> build_descriptor(const DescriptorArchitecture& arch) {
  DescriptorNet<T> net;
  const auto g = static_cast<std::size_t>(arch.grid);
  net.input_shape = {static_cast<std::size_t>(arch.in_channels), g, g, g};
  int extent = arch.grid;
  int channels = arch.in_channels;
  for (const auto& c : arch.convs) {
    const auto [lo, hi] = same_padding(extent, c.kernel, c.stride);
    net.layers.push_back(Layer<T>::conv3d(channels, c.filters, {c.kernel, c.kernel, c.kernel},
                                          {c.stride, c.stride, c.stride}, {lo, lo, lo}, {hi, hi, hi}));
    net.layers.push_back(Layer<T>::relu());
    extent = (extent + c.stride - 1) / c.stride;
    channels = c.filters;
  }
  const std::size_t features = static_cast<std::size_t>(channels) * extent * extent * extent;
  net.layers.push_back(Layer<T>::fully_connected(features, 1));
  net.validate();
  return net;
}

template <typename T>
GeneratorNet<T> build_generator(const GeneratorArchitecture& arch) {
  GeneratorNet<T> gen;
  gen.latent_dim = arch.latent_dim;
  const auto b = static_cast<std::size_t>(arch.base_extent);
  const auto c0 = static_cast<std::size_t>(arch.stem_channels);
  gen.layers.push_back(Layer<T>::fully_connected(arch.latent_dim, c0 * b * b * b, {c0, b, b, b}));
  gen.layers.push_back(Layer<T>::batch_norm(arch.stem_channels));
  gen.layers.push_back(Layer<T>::relu());
  int channels = arch.stem_channels;
  int extent = arch.base_extent;
  for (std::size_t i = 0; i < arch.deconvs.size(); ++i) {
    const auto& d = arch.deconvs[i];
    // Output extent = extent * upsample; total padding is kernel - upsample.
    const int total = d.kernel - d.upsample;
    if (total < 0) throw std::invalid_argument("deconv kernel smaller than its upsample factor");
    const int lo = total / 2, hi = total - total / 2;
    gen.layers.push_back(Layer<T>::deconv3d(channels, d.channels, {d.kernel, d.kernel, d.kernel},
                                            {d.upsample, d.upsample, d.upsample}, {lo, lo, lo},
                                            {hi, hi, hi}));
    channels = d.channels;
    extent *= d.upsample;
    if (i + 1 < arch.deconvs.size()) {
      gen.layers.push_back(Layer<T>::batch_norm(channels));
      gen.layers.push_back(Layer<T>::relu());
    }
  }
  gen.layers.push_back(Layer<T>::tanh());
  const auto e = static_cast<std::size_t>(extent);
  gen.output_shape = {static_cast<std::size_t>(channels), e, e, e};
  gen.validate();
  return gen;
}

template DescriptorNet<float> build_descriptor<float>(const DescriptorArchitecture&);
template DescriptorNet<double> build_descriptor<double>(const DescriptorArchitecture&);
template GeneratorNet<float> build_generator<float>(const GeneratorArchitecture&);
template GeneratorNet<double> build_generator<double>(const GeneratorArchitecture&);

}  // namespace descnet
