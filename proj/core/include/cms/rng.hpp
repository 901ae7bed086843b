#pragma once

#include <cstdint>

namespace cms {

/// Counter-based pseudo-random stream: output k is a splitmix64-style hash of
/// (seed, stream-id, k). Identical (seed, stream) reproduce identical draws
/// bit-for-bit on every platform; distinct stream ids are independent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed + 0x9E3779B97F4A7C15ull) ^ mix(stream + 0xBF58476D1CE4E5B9ull))),
        counter_(0) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Derive an independent stream for a side purpose (reservoir sampling,
  /// replica spawning) without disturbing this stream's counter.
  RngStream substream(std::uint64_t purpose) const {
    RngStream s(key_, purpose ^ 0xD6E8FEB86659FD93ull);
    return s;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace cms
