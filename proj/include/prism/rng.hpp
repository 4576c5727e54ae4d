#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace prism {

// splitmix64 finalizer: a fixed, well-mixed 64-bit hash.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Counter-keyed Gaussian stream. Draw k of channel c under a given seed is a
// pure function of (seed, c, k) — independent of call order and thread
// placement, so records are reproducible byte-for-byte however the work is
// scheduled. (Stateful standard-library engines would tie the n-th draw to
// call history, and std::normal_distribution is implementation-defined.)
class noise_stream {
 public:
  noise_stream(std::uint64_t seed, std::string_view channel)
      : key_(mix64(seed ^ fnv1a(channel))) {}

  // Unit normal via Box–Muller on two mixed uniforms in (0, 1].
  double gaussian(std::uint64_t index) const {
    const double u1 = to_unit(mix64(key_ ^ mix64(2 * index)));
    const double u2 = to_unit(mix64(key_ ^ mix64(2 * index + 1)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  static double to_unit(std::uint64_t x) {
    // 53 mantissa bits, shifted into (0, 1] so the log is always finite
    return (static_cast<double>(x >> 11) + 1.0) * 0x1p-53;
  }

  std::uint64_t key_;
};

}  // namespace prism
