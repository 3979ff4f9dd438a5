#pragma once

// Deterministic PRNG used everywhere randomness appears (sampling oracles,
// IK restarts, robot id generation, benchmark seeding).  splitmix64 is tiny
// and produces identical streams on every platform, unlike the standard
// library distributions.

#include <cstdint>
#include <string>

namespace armkit {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : _state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (_state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + u01() * (hi - lo); }

 private:
  std::uint64_t _state;
};

// Stable 64-bit hash for keying seeds off strings (FNV-1a).
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// UUID-format id drawn from the given stream (RFC-4122 v4 layout).
inline std::string uuid_from(SplitMix64& rng) {
  static const char* hex = "0123456789abcdef";
  std::uint64_t a = rng.next(), b = rng.next();
  std::string out;
  out.reserve(36);
  auto put = [&](std::uint64_t v, int nibbles) {
    for (int i = nibbles - 1; i >= 0; --i) out.push_back(hex[(v >> (4 * i)) & 0xf]);
  };
  put(a >> 32, 8);
  out.push_back('-');
  put(a >> 16, 4);
  out.push_back('-');
  put(0x4000 | (a & 0x0fff), 4);  // version 4
  out.push_back('-');
  put(0x8000 | (b >> 52 & 0x3fff), 4);  // variant 10xx
  out.push_back('-');
  put(b & 0xffffffffffffULL, 12);
  return out;
}

}  // namespace armkit
