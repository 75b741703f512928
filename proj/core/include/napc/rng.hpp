#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace napc {

// Counter-based pseudo random generator with named substreams.
//
// Every consumer derives its own stream from (name, seed, indices...), so
// there is no global RNG state to serialize and two runs with equal seeds
// replay identical draws regardless of evaluation order or parallelism.
// The block function is the splitmix64 finalizer over a keyed counter.
class Rng {
public:
  Rng(uint64_t key, uint64_t counter = 0) : key_(key), counter_(counter) {}

  /// Derive a stream key from a name, a seed, and optional integer indices.
  static Rng stream(std::string_view name, uint64_t seed,
                    std::initializer_list<uint64_t> indices = {}) {
    uint64_t key = mix(seed ^ 0x4e415043ull);  // "NAPC"
    key = mix(key ^ fnv1a(name));
    for (uint64_t idx : indices) {
      key = mix(key ^ mix(idx + 0x9e3779b97f4a7c15ull));
    }
    return Rng(key);
  }

  uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float next_float() { return static_cast<float>(next_double()); }

  /// Uniform integer in [0, bound), unbiased via rejection.
  uint64_t next_below(uint64_t bound) {
    // bound == 0 is a caller bug; keep the check cheap.
    const uint64_t threshold = -bound % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform in [lo, hi].
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double next_normal() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

private:
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t key_;
  uint64_t counter_;
};

}  // namespace napc
