#include "bevfuse/container.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace bevfuse {

namespace {

constexpr char kTenMagic[4] = {'T', 'E', 'N', '1'};
constexpr char kCkptMagic[4] = {'B', 'V', 'C', 'K'};

size_t dtype_size(TenDtype d) {
  switch (d) {
    case TenDtype::f32: return 4;
    case TenDtype::f64: return 8;
    case TenDtype::u8: return 1;
  }
  throw CorruptContainer("unknown dtype code");
}

void write_u64_le(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw CorruptContainer("truncated u64");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_u32_le(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw CorruptContainer("truncated u32");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

uint64_t TenData::numel() const {
  uint64_t n = 1;
  for (uint64_t d : dims) n *= d;
  return n;
}

std::vector<double> TenData::as_f64() const {
  std::vector<double> out;
  out.reserve(numel());
  switch (dtype) {
    case TenDtype::f32:
      out.assign(f32.begin(), f32.end());
      break;
    case TenDtype::f64:
      out = f64;
      break;
    case TenDtype::u8:
      out.assign(u8.begin(), u8.end());
      break;
  }
  return out;
}

void write_ten(std::ostream& os, TenDtype dtype, std::span<const uint64_t> dims,
               const void* payload) {
  os.write(kTenMagic, 4);
  uint8_t dt = static_cast<uint8_t>(dtype);
  uint8_t rank = static_cast<uint8_t>(dims.size());
  os.write(reinterpret_cast<const char*>(&dt), 1);
  os.write(reinterpret_cast<const char*>(&rank), 1);
  uint64_t n = 1;
  for (uint64_t d : dims) {
    write_u64_le(os, d);
    n *= d;
  }
  os.write(reinterpret_cast<const char*>(payload),
           static_cast<std::streamsize>(n * dtype_size(dtype)));
  if (!os) throw CorruptContainer("short write");
}

TenData read_ten(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kTenMagic, 4) != 0)
    throw CorruptContainer("bad tensor container magic");
  uint8_t dt = 0, rank = 0;
  is.read(reinterpret_cast<char*>(&dt), 1);
  is.read(reinterpret_cast<char*>(&rank), 1);
  if (!is) throw CorruptContainer("truncated header");
  if (dt > 2) throw CorruptContainer("unknown dtype code");

  TenData t;
  t.dtype = static_cast<TenDtype>(dt);
  uint64_t n = 1;
  for (int i = 0; i < rank; ++i) {
    uint64_t d = read_u64_le(is);
    if (d != 0 && n > std::numeric_limits<uint64_t>::max() / d)
      throw CorruptContainer("dimension overflow");
    t.dims.push_back(d);
    n *= d;
  }
  if (n > (1ull << 33))  // 8 GiB of doubles; nothing here is that large
    throw CorruptContainer("implausible element count");

  auto read_payload = [&](void* dst, size_t bytes) {
    is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(is.gcount()) != bytes)
      throw CorruptContainer("truncated payload");
  };
  switch (t.dtype) {
    case TenDtype::f32:
      t.f32.resize(n);
      read_payload(t.f32.data(), n * 4);
      break;
    case TenDtype::f64:
      t.f64.resize(n);
      read_payload(t.f64.data(), n * 8);
      break;
    case TenDtype::u8:
      t.u8.resize(n);
      read_payload(t.u8.data(), n);
      break;
  }
  return t;
}

void write_ten_file(const std::string& path, TenDtype dtype,
                    std::span<const uint64_t> dims, const void* payload) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  write_ten(os, dtype, dims, payload);
}

TenData read_ten_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptContainer("cannot open: " + path);
  return read_ten(is);
}

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  os.write(kCkptMagic, 4);
  write_u32_le(os, 1u);
  write_u32_le(os, static_cast<uint32_t>(entries.size()));
  for (const auto& e : entries) {
    write_u32_le(os, static_cast<uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const void* payload = nullptr;
    switch (e.data.dtype) {
      case TenDtype::f32: payload = e.data.f32.data(); break;
      case TenDtype::f64: payload = e.data.f64.data(); break;
      case TenDtype::u8: payload = e.data.u8.data(); break;
    }
    write_ten(os, e.data.dtype, e.data.dims, payload);
  }
  if (!os) throw CorruptContainer("short checkpoint write");
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorruptContainer("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw CorruptContainer("bad checkpoint magic");
  uint32_t version = read_u32_le(is);
  if (version != 1) throw CorruptContainer("unsupported checkpoint version");
  uint32_t count = read_u32_le(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = read_u32_le(is);
    if (len > (1u << 16)) throw CorruptContainer("implausible name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw CorruptContainer("truncated entry name");
    out.push_back({std::move(name), read_ten(is)});
  }
  return out;
}

}  // namespace bevfuse
