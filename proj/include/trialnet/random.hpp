#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace trialnet {

/// 64-bit FNV-1a over raw bytes. This is the one hash used across the
/// project: parameter-init seeding, token and sentence hashing, and
/// fingerprint invariants. Keeping a single documented hash makes every
/// file format reproducible from the description alone.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

/// Deterministic splitmix64 generator. All randomness funnels through this
/// type (never the standard <random> distributions, whose output is
/// implementation-defined), so identical seeds give identical results on
/// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive. The modulo bias is
  /// negligible for the sizes used here (n << 2^64).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

/// Independent stream derived from a base seed and a label, so subsystems
/// (dropout, shuffling, bootstrap, ...) cannot perturb each other.
inline Rng derived_rng(std::uint64_t seed, std::string_view label) {
  return Rng(seed ^ fnv1a64(label));
}

}  // namespace trialnet
