#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "twinforge/io.h"

namespace twinforge::cli {

inline constexpr const char* kManifestFormat = "twinforge.manifest/1";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

/// Lowercase hex SHA-256 of a file's bytes.
std::string Sha256File(const std::filesystem::path& path);

/// Current UTC time as ISO 8601 with second resolution.
std::string UtcNow();

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  io::Json config;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  /// Relative path (generic form) -> SHA-256.
  std::map<std::string, std::string> digests;
};

io::Json ToJson(const Manifest& m);
Manifest ManifestFromJson(const io::Json& j);

/// Digests every regular file below `dir` except the manifest itself.
std::map<std::string, std::string> DigestTree(const std::filesystem::path& dir);

}  // namespace twinforge::cli
