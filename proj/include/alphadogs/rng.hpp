#pragma once

#include <cmath>
#include <cstdint>

namespace adogs {

// Counter-based random stream built on the splitmix64 finalizer.
//
// A stream is identified by a 64-bit key derived from (seed, stream index);
// draw k of the stream hashes key + k * gamma through the finalizer.  The
// full generator state is two integers, so a stream can be serialized,
// resumed mid-sequence, and advanced independently of every other stream.
// Streams with distinct indices are statistically independent for practical
// purposes, which is what lets every sampled point own its own stream.
class RngStream {
 public:
  RngStream() = default;

  RngStream(std::uint64_t seed, std::uint64_t stream_index)
      : key_(mix(seed ^ mix(stream_index ^ kStreamSalt))) {}

  static RngStream restore(std::uint64_t key, std::uint64_t counter) {
    RngStream s;
    s.key_ = key;
    s.counter_ = counter;
    return s;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return mix(key_ + (counter_++) * kGamma); }

  // Uniform on the open interval (0, 1); never returns an exact endpoint,
  // so it is always safe inside a log.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; consumes exactly two counter values per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * kPi * u2);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kStreamSalt = 0x5bf0363546290f13ull;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  static std::uint64_t mix(std::uint64_t z) {
    z += kGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace adogs
