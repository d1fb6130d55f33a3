#pragma once

// Weight archive: one file of named tensors plus string metadata.
//
// Byte layout (all integers little-endian):
//
//   8   magic "CRWARCH\0"
//   u32 format version (1)
//   u32 metadata count, then per entry sorted by key:
//         u32 key length, key bytes, u32 value length, value bytes
//   u32 tensor count, then per tensor sorted by name:
//         u32 name length, name bytes
//         u8  dtype (1 = float32, 2 = float64)
//         u8  rank, then rank x u64 extents
//         u64 payload length in bytes, payload (IEEE-754 little-endian)
//   u64 FNV-1a 64 of every preceding byte
//
// Model tensors are rank 4 (NCHW). Because both sections are sorted and the
// encoding has no padding or timestamps, equal contents give equal bytes.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cartoon/layers.hpp"

namespace cr {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct ArchiveTensor {
  std::uint8_t dtype = 1;
  std::vector<std::uint64_t> dims;
  std::vector<unsigned char> payload;
};

class WeightArchive {
 public:
  std::map<std::string, std::string> meta;
  std::map<std::string, ArchiveTensor> tensors;

  void put(const std::string& name, const Tensor<float>& t);
  void put(const std::string& name, const Tensor<double>& t);
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  /// Throws DataError naming the tensor if it is missing, not float32, or not rank 4.
  Tensor<float> get_f32(const std::string& name) const;

  const std::string& meta_at(const std::string& key) const;

  std::vector<unsigned char> serialize() const;
  /// `origin` names the source in error messages.
  static WeightArchive parse(const std::vector<unsigned char>& bytes, const std::string& origin);

  /// Writes via a temporary file and rename.
  void save(const std::string& path) const;
  static WeightArchive load(const std::string& path);
};

/// Stores every parameter under its own name.
void store_params(WeightArchive& ar, const ParamList<float>& params);
/// Copies values into existing parameters. Missing names or shape mismatches
/// throw DataError naming the parameter.
void load_params(const WeightArchive& ar, const ParamList<float>& params);

/// Hex FNV-1a 64 digest of a byte string.
std::string fnv1a_hex(const std::vector<unsigned char>& bytes);

}  // namespace cr
