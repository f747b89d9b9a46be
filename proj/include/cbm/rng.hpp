#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cbm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic generator with named sub-streams. Uniform and Gaussian
/// variates are produced from raw engine output, so streams are
/// bit-identical across platforms for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from (master, stream id).
  static Rng derive(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return Rng(a ^ (b << 1));
  }

  Rng derive_stream(std::uint64_t stream) {
    std::uint64_t base = next_u64();
    return Rng::derive(base, stream);
  }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller; second variate is cached.
  double gaussian(double stddev = 1.0) {
    if (has_cached_) {
      has_cached_ = false;
      return cached_ * stddev;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta) * stddev;
  }

  /// Number of raw engine draws so far (test hook).
  std::uint64_t draw_count() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cbm
