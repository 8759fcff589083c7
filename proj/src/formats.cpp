#include "descnet/formats.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>

namespace descnet {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// VOX1

namespace {

constexpr std::uint8_t kPayloadBits = 0;
constexpr std::uint8_t kPayloadFloat = 1;

void write_record_header(ByteWriter& w, std::uint8_t payload, const PreprocessingInfo& pre,
                         int label, const Shape& dims) {
  w.u8(payload);
  w.u8(static_cast<std::uint8_t>(pre.kind));
  w.u16(0);
  w.i32(label);
  w.f32(pre.mean);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u32(static_cast<std::uint32_t>(d));
}

void write_record(ByteWriter& w, const VoxelGrid& g) {
  g.validate();
  write_record_header(w, kPayloadBits, g.preprocessing, g.label, {g.dims[0], g.dims[1], g.dims[2]});
  std::vector<std::uint8_t> packed((g.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.occupancy[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  w.bytes(packed);
}

void write_record(ByteWriter& w, const TensorRecord& r) {
  if (r.tensor.empty()) throw FormatError("cannot store a null tensor");
  write_record_header(w, kPayloadFloat, r.preprocessing, r.label, r.tensor.shape());
  for (float v : r.tensor.values()) w.f32(v);
}

Preprocessing read_preprocessing(std::uint8_t v) {
  if (v > 2) throw FormatError("VOX1: unknown preprocessing code " + std::to_string(v));
  return static_cast<Preprocessing>(v);
}

VoxRecord read_record(ByteReader& r) {
  const std::uint8_t payload = r.u8("VOX1 record");
  PreprocessingInfo pre;
  pre.kind = read_preprocessing(r.u8("VOX1 record"));
  if (r.u16("VOX1 record") != 0) throw FormatError("VOX1: reserved field is not zero");
  const int label = r.i32("VOX1 record");
  pre.mean = r.f32("VOX1 record");
  const std::uint32_t rank = r.u32("VOX1 record");
  if (rank == 0 || rank > 8) throw FormatError("VOX1: unsupported rank " + std::to_string(rank));
  Shape dims(rank);
  for (auto& d : dims) d = r.u32("VOX1 dims");
  if (payload == kPayloadBits) {
    if (rank != 3) throw FormatError("VOX1: occupancy records must be rank 3");
    VoxelGrid g({dims[0], dims[1], dims[2]});
    g.preprocessing = pre;
    g.label = label;
    const auto packed = r.bytes((g.size() + 7) / 8, "VOX1 occupancy payload");
    for (std::size_t i = 0; i < g.size(); ++i) g.occupancy[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return g;
  }
  if (payload == kPayloadFloat) {
    for (auto d : dims) {
      if (d == 0) throw FormatError("VOX1: float records need positive dims");
    }
    const std::size_t n = shape_numel(dims);
    if (r.remaining() / 4 < n) throw FormatError("VOX1 float payload: unexpected end of data");
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32("VOX1 float payload");
    return TensorRecord{Tensor(dims, std::move(values)), pre, label};
  }
  throw FormatError("VOX1: unknown payload code " + std::to_string(payload));
}

}  // namespace

std::vector<std::uint8_t> write_native(std::span<const VoxRecord> records) {
  ByteWriter w;
  w.magic("VOX1");
  w.u32(kVoxVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) std::visit([&](const auto& v) { write_record(w, v); }, rec);
  return w.take();
}

std::vector<VoxRecord> read_native(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VOX1", "VOX1 header");
  const std::uint32_t version = r.u32("VOX1 header");
  if (version != kVoxVersion) throw FormatError("VOX1: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("VOX1 header");
  std::vector<VoxRecord> out;
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_record(r));
  if (r.remaining() != 0) throw FormatError("VOX1: trailing bytes after last record");
  return out;
}

std::vector<std::uint8_t> write_native(const VoxelGrid& grid) {
  const VoxRecord rec = grid;
  return write_native(std::span<const VoxRecord>(&rec, 1));
}

std::vector<std::uint8_t> write_native(const TensorRecord& tensor) {
  const VoxRecord rec = tensor;
  return write_native(std::span<const VoxRecord>(&rec, 1));
}

std::vector<std::uint8_t> write_native_grids(std::span<const VoxelGrid> grids) {
  std::vector<VoxRecord> recs(grids.begin(), grids.end());
  return write_native(recs);
}

std::vector<VoxelGrid> read_native_grids(std::span<const std::uint8_t> bytes) {
  std::vector<VoxelGrid> out;
  for (auto& rec : read_native(bytes)) {
    if (!std::holds_alternative<VoxelGrid>(rec)) throw FormatError("VOX1: expected occupancy records");
    out.push_back(std::move(std::get<VoxelGrid>(rec)));
  }
  return out;
}

TensorRecord read_native_tensor(std::span<const std::uint8_t> bytes) {
  auto recs = read_native(bytes);
  if (recs.size() != 1 || !std::holds_alternative<TensorRecord>(recs[0])) {
    throw FormatError("VOX1: expected exactly one float record");
  }
  return std::move(std::get<TensorRecord>(recs[0]));
}

void save_grids(const std::filesystem::path& path, std::span<const VoxelGrid> grids) {
  write_file_atomic(path, write_native_grids(grids));
}

std::vector<VoxelGrid> load_grids(const std::filesystem::path& path) {
  return read_native_grids(read_file_bytes(path));
}

void save_tensor(const std::filesystem::path& path, const TensorRecord& tensor) {
  write_file_atomic(path, write_native(tensor));
}

TensorRecord load_tensor(const std::filesystem::path& path) {
  return read_native_tensor(read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// binvox

VoxelGrid read_binvox(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw FormatError("binvox: truncated header");
    std::string line(reinterpret_cast<const char*>(bytes.data()) + start, pos - start);
    ++pos;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line().rfind("#binvox", 0) != 0) throw FormatError("binvox: missing '#binvox' magic");
  std::size_t d = 0, h = 0, w = 0;
  bool have_dims = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "data") break;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "dim") {
      if (!(is >> d >> h >> w) || d == 0 || h == 0 || w == 0) throw FormatError("binvox: bad dim line");
      have_dims = true;
    } else if (key == "translate") {
      double tx, ty, tz;
      if (!(is >> tx >> ty >> tz)) throw FormatError("binvox: bad translate line");
    } else if (key == "scale") {
      double s;
      if (!(is >> s)) throw FormatError("binvox: bad scale line");
    } else {
      throw FormatError("binvox: unexpected header line '" + line + "'");
    }
  }
  if (!have_dims) throw FormatError("binvox: missing dim line");
  // File order: index = x * (w * h) + z * w + y; grid axes are (x, y, z).
  VoxelGrid g({d, w, h});
  const std::size_t total = d * h * w;
  std::size_t n = 0;
  while (n < total) {
    if (pos + 2 > bytes.size()) throw FormatError("binvox: payload shorter than dims");
    const std::uint8_t value = bytes[pos];
    const std::size_t run = bytes[pos + 1];
    pos += 2;
    if (value > 1) throw FormatError("binvox: run value must be 0 or 1");
    if (run == 0 || n + run > total) throw FormatError("binvox: run length overflows the grid");
    for (std::size_t k = 0; k < run; ++k, ++n) {
      const std::size_t x = n / (w * h);
      const std::size_t z = (n / w) % h;
      const std::size_t y = n % w;
      g.occupancy[g.index(x, y, z)] = value;
    }
  }
  if (pos != bytes.size()) throw FormatError("binvox: payload longer than dims");
  return g;
}

std::vector<std::uint8_t> write_binvox(const VoxelGrid& grid) {
  grid.validate();
  const std::size_t d = grid.dims[0], w = grid.dims[1], h = grid.dims[2];
  std::ostringstream hdr;
  hdr << "#binvox 1\ndim " << d << ' ' << h << ' ' << w << "\ntranslate 0 0 0\nscale 1\ndata\n";
  const std::string head = hdr.str();
  std::vector<std::uint8_t> out(head.begin(), head.end());
  const std::size_t total = d * h * w;
  std::size_t n = 0;
  while (n < total) {
    auto value_at = [&](std::size_t i) {
      return grid.occupancy[grid.index(i / (w * h), i % w, (i / w) % h)];
    };
    const std::uint8_t v = value_at(n);
    std::size_t run = 1;
    while (n + run < total && run < 255 && value_at(n + run) == v) ++run;
    out.push_back(v);
    out.push_back(static_cast<std::uint8_t>(run));
    n += run;
  }
  return out;
}

}  // namespace descnet
