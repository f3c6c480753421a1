#pragma once

#include <cmath>
#include <cstdint>

namespace sahanet {

/// SplitMix64 generator (Vigna, public domain). All randomness in the
/// library flows through this engine so that seeded runs are
/// bit-reproducible across platforms and thread schedules.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Box-Muller normal draw. Consumes exactly two uniforms per call so the
  /// stream position never depends on the values drawn.
  double normal(double mean, double stddev) {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.28318530717958647692 * u2);
  }

 private:
  std::uint64_t state_;
};

/// Deterministic sub-stream derivation; children with different tags never
/// share state with the parent stream or with each other.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  Rng mix(base ^ (0xD1B54A32D192ED03ULL + tag * 0x9E3779B97F4A7C15ULL));
  return mix.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) {
  return derive_seed(derive_seed(base, a, b), c);
}

}  // namespace sahanet
