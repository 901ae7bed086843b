#include "cms/manifest.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace cms {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(ss.str());
  return os.str();
}

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string RunManifest::to_json_string() const {
  nlohmann::json j;
  j["spec_hash"] = spec_hash;
  j["command"] = command;
  j["argv"] = argv;
  j["seed"] = seed;
  j["version"] = version;
  j["timestamp"] = timestamp;
  return j.dump(2);
}

}  // namespace cms
