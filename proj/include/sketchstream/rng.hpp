#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace sketchstream {

/// SplitMix64 finalizer; used to turn (seed, stream id) into engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Reproducible generator: std::mt19937_64 (whose output sequence is fixed by
/// the standard) seeded through SplitMix64. Uniforms take the top 53 bits and
/// normals use the Marsaglia polar method, so a seed fixes the whole sequence
/// independently of the standard library's distribution implementations.
///
/// Substreams: `Rng::derive(seed, id)` seeds the engine with
/// splitmix64(seed ^ splitmix64(id + 1)). Named ids are listed in `Substream`.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed ^ splitmix64(stream + 1));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Lemire-style rejection keeps the result exactly uniform.
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Substream ids derived from one root seed.
namespace substream {
inline constexpr std::uint64_t kForwardPass = 0;
inline constexpr std::uint64_t kReplayPass = 1;
inline constexpr std::uint64_t kSpectralStart = 2;
inline constexpr std::uint64_t kSynthItems = 16;
inline constexpr std::uint64_t kSynthUsers = 17;
inline constexpr std::uint64_t kSynthRowBase = 1ull << 32;  // + row index
}  // namespace substream

}  // namespace sketchstream
