#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

namespace defed {

// Deterministic, platform-independent random streams.  Every stochastic
// choice the simulator makes (batch draws, client selection, data synthesis,
// initial points) is keyed by a (master seed, id, round, purpose) tuple so
// results never depend on thread scheduling or on the standard library's
// distribution implementations.

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

inline uint64_t derive_stream(uint64_t master, uint64_t a, uint64_t b, uint64_t tag) {
  uint64_t h = mix64(master + 0x9e3779b97f4a7c15ull);
  h = mix64(h ^ (a + 0xa24baed4963ee407ull));
  h = mix64(h ^ (b + 0x9fb21c651e98df25ull));
  h = mix64(h ^ (tag + 0xd6e8feb86659fd93ull));
  return h;
}

// Stream purposes.
inline constexpr uint64_t kStreamBatch = 1;
inline constexpr uint64_t kStreamSelect = 2;
inline constexpr uint64_t kStreamInit = 3;
inline constexpr uint64_t kStreamData = 4;
inline constexpr uint64_t kStreamSeed = 5;
inline constexpr uint64_t kStreamNoise = 6;

// xoshiro256++ with SplitMix64 seeding.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) {
      sm += 0x9e3779b97f4a7c15ull;
      word = mix64(sm);
    }
    have_normal_ = false;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (pair cached).
  double next_normal() {
    if (have_normal_) {
      have_normal_ = false;
      return cached_normal_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, bound), bound >= 1.  Lemire's rejection method.
  uint64_t next_below(uint64_t bound) {
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < bound) {
      const uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * bound;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double cached_normal_ = 0;
  bool have_normal_ = false;
};

// k distinct indices from {0, ..., population-1} via partial Fisher-Yates.
// Order of the draw is part of the deterministic contract.
inline std::vector<int> sample_without_replacement(int population, int k, Rng& rng) {
  std::vector<int> idx(population);
  for (int i = 0; i < population; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(population - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace defed
