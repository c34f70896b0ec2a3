#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promind/tensor.hpp"

namespace promind::num {

// Versioned binary container of named tensors. Round trips are bit exact.
// Layout: magic "PMTC", u32 version, u32 count, then per entry:
//   u32 name_len, name bytes, u8 dtype (0=f32, 1=f64), u32 ndim, u64 dims,
//   raw little-endian data.
class Checkpoint {
 public:
  static constexpr uint32_t kVersion = 1;

  void put(const std::string& name, const Tensor32& t);
  void put(const std::string& name, const Tensor64& t);
  bool has(const std::string& name) const;
  Tensor32 get_f32(const std::string& name) const;
  Tensor64 get_f64(const std::string& name) const;
  std::vector<std::string> names() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Serialized bytes (same encoding as the file); used for artifact hashing.
  std::vector<uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<uint8_t>& bytes);

 private:
  struct Entry {
    uint8_t dtype;  // 0 = f32, 1 = f64
    std::vector<size_t> shape;
    std::vector<uint8_t> raw;
  };
  std::map<std::string, Entry> entries_;
};

uint64_t fnv1a64(const uint8_t* data, size_t len);
uint64_t file_checksum(const std::string& path);
std::string checksum_hex(uint64_t h);

}  // namespace promind::num
