#include "aggnet/serialize.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aggnet/errors.hpp"

namespace fs = std::filesystem;

namespace aggnet {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hash_string(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void append_le64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::uint32_t read_le32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

void save_bundle(const std::string& dir, const ParamStore& params, nlohmann::json extra) {
  fs::create_directories(dir);

  std::string blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Param& p = params.entry(i);
    std::uint64_t offset = blob.size();
    for (double v : p.value.values()) append_le64(blob, std::bit_cast<std::uint64_t>(v));
    nlohmann::json rec;
    rec["name"] = p.name;
    rec["dtype"] = "f64";
    rec["shape"] = p.value.shape();
    rec["offset"] = offset;
    rec["length"] = blob.size() - offset;
    rec["trainable"] = p.trainable;
    tensors.push_back(std::move(rec));
  }

  std::uint64_t blob_hash = fnv1a64(
      {reinterpret_cast<const unsigned char*>(blob.data()), blob.size()});

  nlohmann::json manifest = std::move(extra);
  manifest["format_version"] = kBundleFormatVersion;
  manifest["class_order"] = {"CAG", "NAG", "OAG"};
  manifest["tensors"] = std::move(tensors);
  manifest["blob"] = {{"file", "weights.bin"},
                      {"bytes", blob.size()},
                      {"hash", hash_string(blob_hash)}};

  write_file_atomic((fs::path(dir) / "weights.bin").string(), blob);
  write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

LoadedBundle load_bundle(const std::string& dir) {
  fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream min(manifest_path, std::ios::binary);
  if (!min) throw IoError("cannot open manifest: " + manifest_path.string());

  LoadedBundle out;
  try {
    min >> out.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  if (!out.manifest.contains("format_version") ||
      !out.manifest["format_version"].is_number_integer()) {
    throw ParseError("manifest missing format_version: " + manifest_path.string());
  }
  int version = out.manifest["format_version"].get<int>();
  if (version != kBundleFormatVersion) {
    throw VersionError("unsupported bundle format version " + std::to_string(version) +
                       " (expected " + std::to_string(kBundleFormatVersion) + ")");
  }

  fs::path blob_path = fs::path(dir) / "weights.bin";
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot open weight blob: " + blob_path.string());
  std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  const auto& blob_meta = out.manifest.at("blob");
  std::uint64_t expect_bytes = blob_meta.at("bytes").get<std::uint64_t>();
  if (blob.size() < expect_bytes) {
    throw TruncatedBlobError("weight blob truncated: have " + std::to_string(blob.size()) +
                             " bytes, manifest says " + std::to_string(expect_bytes));
  }
  if (blob.size() != expect_bytes) {
    throw TruncatedBlobError("weight blob size mismatch: have " + std::to_string(blob.size()) +
                             " bytes, manifest says " + std::to_string(expect_bytes));
  }
  std::uint64_t got_hash = fnv1a64(
      {reinterpret_cast<const unsigned char*>(blob.data()), blob.size()});
  if (hash_string(got_hash) != blob_meta.at("hash").get<std::string>()) {
    throw HashMismatchError("weight blob hash mismatch for " + blob_path.string());
  }

  for (const auto& rec : out.manifest.at("tensors")) {
    TensorRecord tr;
    tr.name = rec.at("name").get<std::string>();
    tr.dtype = rec.at("dtype").get<std::string>();
    tr.shape = rec.at("shape").get<std::vector<std::size_t>>();
    tr.offset = rec.at("offset").get<std::uint64_t>();
    tr.length = rec.at("length").get<std::uint64_t>();
    tr.trainable = rec.value("trainable", true);

    std::size_t count = 1;
    for (std::size_t d : tr.shape) count *= d;
    std::size_t elem = 0;
    if (tr.dtype == "f64") {
      elem = 8;
    } else if (tr.dtype == "f32") {
      elem = 4;
    } else {
      throw ParseError("tensor '" + tr.name + "' has unsupported dtype " + tr.dtype);
    }
    if (tr.length != count * elem || tr.offset + tr.length > blob.size()) {
      throw TruncatedBlobError("tensor '" + tr.name + "' record does not fit the blob");
    }

    std::vector<double> vals(count);
    const unsigned char* base =
        reinterpret_cast<const unsigned char*>(blob.data()) + tr.offset;
    if (tr.dtype == "f64") {
      for (std::size_t i = 0; i < count; ++i) {
        vals[i] = std::bit_cast<double>(read_le64(base + i * 8));
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        vals[i] = static_cast<double>(std::bit_cast<float>(read_le32(base + i * 4)));
      }
    }
    out.tensors.push_back(Tensor::from(tr.shape, std::move(vals)));
    out.records.push_back(std::move(tr));
  }
  return out;
}

}  // namespace aggnet
