#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hgp {

// Seedable generator with a fixed, named algorithm so runs can state exactly
// what produced their random streams. Uniforms take the top 53 bits of
// mt19937_64 output; normals use the cosine branch of Box-Muller (one normal
// per two uniforms, no cached state).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  double uniform_open0() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal draw.
  double normal() {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const double u = uniform();
    int v = lo + static_cast<int>(u * (static_cast<double>(hi) - lo + 1.0));
    return v > hi ? hi : v;
  }

  static constexpr const char* algorithm_id() { return "mt19937_64/u53/box-muller-cos"; }

  /// Derive an independent stream seed (splitmix64 finalizer over seed^stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hgp
