#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Tensor container file: magic "TEN1", u8 dtype (0=f32, 1=f64, 2=u8),
// u8 rank, rank x u64 little-endian dims, row-major payload.
enum class TenDtype : uint8_t { f32 = 0, f64 = 1, u8 = 2 };

struct TenData {
  TenDtype dtype = TenDtype::f64;
  std::vector<uint64_t> dims;
  std::vector<float> f32;
  std::vector<double> f64;
  std::vector<uint8_t> u8;

  uint64_t numel() const;
  // payload as doubles regardless of stored dtype
  std::vector<double> as_f64() const;
};

void write_ten(std::ostream& os, TenDtype dtype, std::span<const uint64_t> dims,
               const void* payload);
TenData read_ten(std::istream& is);

void write_ten_file(const std::string& path, TenDtype dtype,
                    std::span<const uint64_t> dims, const void* payload);
TenData read_ten_file(const std::string& path);

// Checkpoint blob: magic "BVCK", u32 version, u32 entry count, then per
// entry a u32 name length, the name bytes, and one TEN1 record.
struct NamedTensor {
  std::string name;
  TenData data;
};

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

}  // namespace bevfuse
