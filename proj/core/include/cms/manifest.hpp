#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cms {

inline constexpr const char* kToolVersion = "0.1.0";

/// Reproducibility record written beside every output file: spec hash, full
/// command line, seed and tool version. Re-running the recorded command
/// reproduces the outputs byte for byte.
struct RunManifest {
  std::string spec_hash;
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string timestamp;

  std::string to_json_string() const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_hash_hex(const std::string& path);
std::string iso8601_now();

}  // namespace cms
