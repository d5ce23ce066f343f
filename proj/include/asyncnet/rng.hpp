#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace asyncnet {

// Counter-based pseudorandom generator (splitmix64 finalizer over an
// incrementing counter). Streams are addressed by (seed, stream): the
// generator for any stream can be constructed independently of every
// other stream, so concurrent trials draw from disjoint sequences no
// matter in which order they run.
//
// All distribution conversions are implemented here rather than with
// <random> adaptors, because std::normal_distribution and friends are
// implementation-defined and would break byte-identical outputs across
// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^
                 mix(stream + 0xD1B54A32D192ED03ULL))) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + counter_ * 0x9E3779B97F4A7C15ULL;
    ++counter_;
    return mix(z);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Draws from {choices[0], ..., choices[n-1]} uniformly.
  std::uint64_t index(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; the second value of each pair is
  // cached so consecutive calls stay cheap and fully deterministic.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Circular complex normal with E|z|^2 = 1.
  std::complex<double> cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * 0.7071067811865475244, im * 0.7071067811865475244};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids. Each trial owns a contiguous block so per-strategy draws
// never interleave; global (non-trial) streams live far above.
namespace streams {
inline constexpr std::uint64_t kPerTrial = 8;
inline constexpr std::uint64_t kData = 0;
inline constexpr std::uint64_t kDistAsync = 1;
inline constexpr std::uint64_t kCentFusion = 2;
inline constexpr std::uint64_t kCentStep = 3;

inline constexpr std::uint64_t kConfig = 0x4000000000000001ULL;
inline constexpr std::uint64_t kSecondMomentMc = 0x4000000000000002ULL;
inline constexpr std::uint64_t kValidation = 0x4000000000000003ULL;
inline constexpr std::uint64_t kFullOperatorMc = 0x4000000000000004ULL;
inline constexpr std::uint64_t kFullOperatorBoot = 0x4000000000000005ULL;

inline std::uint64_t trial(std::uint64_t t, std::uint64_t which) {
  return t * kPerTrial + which;
}
}  // namespace streams

}  // namespace asyncnet
