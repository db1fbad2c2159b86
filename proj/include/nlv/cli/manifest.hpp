#pragma once
// Run manifest: config echo, versions, seed, wall time and a SHA-256 for every
// emitted file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace nlv::cli {

/// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct Manifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int threads = 1;
  double wall_seconds = 0.0;
  int status = 0;
  std::vector<std::string> failed;
  nlohmann::json summary;
  std::vector<ManifestEntry> files;
};

/// Hashes `files` (relative to `out_dir`) and writes out_dir/manifest.json.
void write_manifest(Manifest m, const std::filesystem::path& out_dir, const std::vector<std::string>& files);

std::string version_string();

}  // namespace nlv::cli
