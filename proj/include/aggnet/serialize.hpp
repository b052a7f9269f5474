#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aggnet/params.hpp"
#include "aggnet/tensor.hpp"

#include "json.hpp"

namespace aggnet {

inline constexpr int kBundleFormatVersion = 1;

// FNV-1a over raw bytes; the integrity hash recorded in manifests.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hash_string(std::uint64_t h);  // "fnv1a64:<16 hex>"

struct TensorRecord {
  std::string name;
  std::string dtype;  // "f64" or "f32"
  std::vector<std::size_t> shape;
  std::uint64_t offset = 0;  // bytes into the blob
  std::uint64_t length = 0;  // bytes
  bool trainable = true;
};

// Writes <dir>/weights.bin (little-endian, tensors in store order) and
// <dir>/manifest.json. extra gets merged into the manifest as-is (config,
// artifact hashes...). All writes go through a temp file plus rename.
void save_bundle(const std::string& dir, const ParamStore& params, nlohmann::json extra);

struct LoadedBundle {
  nlohmann::json manifest;
  std::vector<TensorRecord> records;
  std::vector<Tensor> tensors;  // aligned with records
};

// Verifies version, blob hash and record bounds; throws VersionError,
// HashMismatchError or TruncatedBlobError respectively.
LoadedBundle load_bundle(const std::string& dir);

// Atomic text file write (temp + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace aggnet
