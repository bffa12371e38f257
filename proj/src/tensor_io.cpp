#include "mgd/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

namespace {

static_assert(sizeof(float) == 4);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw IoError("truncated raw tensor file");
  return to_little(v);
}

}  // namespace

void write_raw(std::ostream& os, std::span<const RawPrediction> scales) {
  os.write(kRawMagic, 4);
  put_u32(os, kRawVersion);
  put_u32(os, static_cast<std::uint32_t>(scales.size()));
  for (const auto& raw : scales) {
    const HeadLayout& l = raw.layout();
    put_u32(os, static_cast<std::uint32_t>(l.grid.cells_x));
    put_u32(os, static_cast<std::uint32_t>(l.grid.cells_y));
    put_u32(os, static_cast<std::uint32_t>(l.grid.cell_w));
    put_u32(os, static_cast<std::uint32_t>(l.grid.cell_h));
    put_u32(os, static_cast<std::uint32_t>(l.num_anchors));
    put_u32(os, static_cast<std::uint32_t>(l.num_classes));
    std::vector<float> buf(raw.values().size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_little(static_cast<float>(raw.values()[i]));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw IoError("failed writing raw tensor stream");
}

void write_raw(const std::filesystem::path& path, std::span<const RawPrediction> scales) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_raw(os, scales);
}

std::vector<RawPrediction> read_raw(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kRawMagic, 4) != 0) {
    throw IoError("not a raw tensor file (bad magic)");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kRawVersion) {
    throw IoError("unsupported raw tensor version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(is);
  if (count > 64) throw IoError("implausible scale count in raw tensor file");
  std::vector<RawPrediction> out;
  for (std::uint32_t s = 0; s < count; ++s) {
    HeadLayout l;
    l.grid.cells_x = static_cast<int>(get_u32(is));
    l.grid.cells_y = static_cast<int>(get_u32(is));
    l.grid.cell_w = static_cast<int>(get_u32(is));
    l.grid.cell_h = static_cast<int>(get_u32(is));
    l.num_anchors = static_cast<int>(get_u32(is));
    l.num_classes = static_cast<int>(get_u32(is));
    try {
      l.validate();
    } catch (const ValidationError& e) {
      throw IoError(std::string("bad raw tensor header: ") + e.what());
    }
    RawPrediction raw(l);
    std::vector<float> buf(raw.values().size());
    if (!is.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
      throw IoError("truncated raw tensor data");
    }
    for (std::size_t i = 0; i < buf.size(); ++i) raw.values()[i] = to_little(buf[i]);
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<RawPrediction> read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return read_raw(is);
}

}  // namespace mgd
