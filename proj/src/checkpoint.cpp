#include "descnet/checkpoint.hpp"

#include <string>

namespace descnet {

namespace {

void write_shape(ByteWriter& w, const Shape& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (auto d : s) w.u32(static_cast<std::uint32_t>(d));
}

Shape read_shape(ByteReader& r, const char* what) {
  const std::uint32_t rank = r.u32(what);
  if (rank > 8) throw FormatError(std::string(what) + ": implausible rank " + std::to_string(rank));
  Shape s(rank);
  for (auto& d : s) d = r.u32(what);
  return s;
}

void write_triple(ByteWriter& w, const Triple& t) {
  for (int v : t) w.i32(v);
}

Triple read_triple(ByteReader& r) {
  Triple t{};
  for (auto& v : t) v = r.i32("3DDN layer");
  return t;
}

void write_tensor(ByteWriter& w, const Tensor& t) {
  write_shape(w, t.shape());
  for (float v : t.values()) w.f32(v);
}

Tensor read_tensor(ByteReader& r) {
  Shape s = read_shape(r, "3DDN tensor");
  for (auto d : s) {
    if (d == 0) throw FormatError("3DDN tensor: zero extent");
  }
  const std::size_t n = shape_numel(s);
  if (r.remaining() / 4 < n) throw FormatError("3DDN tensor: unexpected end of data");
  std::vector<float> values(n);
  for (auto& v : values) v = r.f32("3DDN tensor");
  return Tensor(std::move(s), std::move(values));
}

void write_layers(ByteWriter& w, const std::vector<Layer<float>>& layers) {
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    write_triple(w, l.stride);
    write_triple(w, l.pad_lo);
    write_triple(w, l.pad_hi);
    write_triple(w, l.window);
    w.f32(l.momentum);
    w.f32(l.epsilon);
    write_shape(w, l.out_shape);
    std::vector<const Tensor*> tensors;
    for (const Tensor* t : {&l.kernel, &l.bias, &l.running_mean, &l.running_var}) {
      if (!t->empty()) tensors.push_back(t);
    }
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) write_tensor(w, *t);
  }
}

std::vector<Layer<float>> read_layers(ByteReader& r) {
  const std::uint32_t count = r.u32("3DDN layer table");
  std::vector<Layer<float>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer<float> l;
    const std::uint32_t kind = r.u32("3DDN layer");
    if (kind > static_cast<std::uint32_t>(LayerKind::MaxPool3D)) {
      throw FormatError("3DDN: unknown layer kind " + std::to_string(kind));
    }
    l.kind = static_cast<LayerKind>(kind);
    l.stride = read_triple(r);
    l.pad_lo = read_triple(r);
    l.pad_hi = read_triple(r);
    l.window = read_triple(r);
    l.momentum = r.f32("3DDN layer");
    l.epsilon = r.f32("3DDN layer");
    l.out_shape = read_shape(r, "3DDN layer");
    const std::uint32_t tensors = r.u32("3DDN layer");
    const bool bn = l.kind == LayerKind::BatchNorm;
    const bool parametric = bn || l.kind == LayerKind::Conv3D || l.kind == LayerKind::Deconv3D ||
                            l.kind == LayerKind::FullyConnected;
    const std::uint32_t expected = bn ? 4 : (parametric ? 2 : 0);
    if (tensors != expected) {
      throw FormatError("3DDN: " + to_string(l.kind) + " layer needs " + std::to_string(expected) +
                        " tensors, found " + std::to_string(tensors));
    }
    if (tensors >= 2) {
      l.kernel = read_tensor(r);
      l.bias = read_tensor(r);
    }
    if (tensors == 4) {
      l.running_mean = read_tensor(r);
      l.running_var = read_tensor(r);
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

ByteReader open_checkpoint(std::span<const std::uint8_t> bytes, NetKind& kind) {
  ByteReader r(bytes);
  r.expect_magic("3DDN", "checkpoint header");
  const std::uint32_t version = r.u32("checkpoint header");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t k = r.u32("checkpoint header");
  if (k > 1) throw FormatError("checkpoint: unknown network kind " + std::to_string(k));
  kind = static_cast<NetKind>(k);
  return r;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const DescriptorNet<float>& net) {
  ByteWriter w;
  w.magic("3DDN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(NetKind::Descriptor));
  w.f32(net.s);
  w.f32(net.temperature);
  w.u32(static_cast<std::uint32_t>(net.reference));
  write_shape(w, net.input_shape);
  write_layers(w, net.layers);
  return w.take();
}

std::vector<std::uint8_t> encode_checkpoint(const GeneratorNet<float>& net) {
  ByteWriter w;
  w.magic("3DDN");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(NetKind::Generator));
  w.u32(static_cast<std::uint32_t>(net.latent_dim));
  w.f32(net.sigma);
  write_shape(w, net.output_shape);
  write_layers(w, net.layers);
  return w.take();
}

NetKind checkpoint_kind(std::span<const std::uint8_t> bytes) {
  NetKind kind{};
  open_checkpoint(bytes, kind);
  return kind;
}

DescriptorNet<float> decode_descriptor(std::span<const std::uint8_t> bytes) {
  NetKind kind{};
  ByteReader r = open_checkpoint(bytes, kind);
  if (kind != NetKind::Descriptor) throw FormatError("checkpoint holds a generator, not a descriptor");
  DescriptorNet<float> net;
  net.s = r.f32("checkpoint");
  net.temperature = r.f32("checkpoint");
  const std::uint32_t ref = r.u32("checkpoint");
  if (ref > 1) throw FormatError("checkpoint: unknown reference kind");
  net.reference = static_cast<ReferenceKind>(ref);
  net.input_shape = read_shape(r, "checkpoint");
  net.layers = read_layers(r);
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  net.validate();
  return net;
}

GeneratorNet<float> decode_generator(std::span<const std::uint8_t> bytes) {
  NetKind kind{};
  ByteReader r = open_checkpoint(bytes, kind);
  if (kind != NetKind::Generator) throw FormatError("checkpoint holds a descriptor, not a generator");
  GeneratorNet<float> net;
  net.latent_dim = r.u32("checkpoint");
  net.sigma = r.f32("checkpoint");
  net.output_shape = read_shape(r, "checkpoint");
  net.layers = read_layers(r);
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  net.validate();
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const DescriptorNet<float>& net) {
  write_file_atomic(path, encode_checkpoint(net));
}

void save_checkpoint(const std::filesystem::path& path, const GeneratorNet<float>& net) {
  write_file_atomic(path, encode_checkpoint(net));
}

DescriptorNet<float> load_descriptor(const std::filesystem::path& path) {
  return decode_descriptor(read_file_bytes(path));
}

GeneratorNet<float> load_generator(const std::filesystem::path& path) {
  return decode_generator(read_file_bytes(path));
}

}  // namespace descnet
