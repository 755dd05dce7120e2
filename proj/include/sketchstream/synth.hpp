#pragma once

// Synthetic low-rank-plus-noise matrix with a decaying row retention rate.

#include <cstdint>
#include <vector>

#include "sketchstream/core_types.hpp"
#include "sketchstream/rng.hpp"

namespace sketchstream {

struct SynthConfig {
  std::uint64_t m = 100;  // items
  std::uint64_t n = 10000;  // users
  std::uint64_t d = 10;   // latent dimension
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (m < 1 || n < 1 || d < 1) throw Error("synthetic dimensions must be at least 1");
    if (!(noise_sd >= 0.0)) throw Error("noise standard deviation must be nonnegative");
  }
};

/// Entry (i, j) = <u_i, v_j> + N(0, noise_sd^2), kept with probability 1 - i/m,
/// emitted in row-major order. Latent vectors are i.i.d. standard normal.
///
/// Each row draws from its own substream (seed, 2^32 + i): one uniform for
/// retention then, if kept, one normal for noise, per column in order. The
/// latent matrices come from substreams 16 (items) and 17 (users).
class SynthStream {
 public:
  explicit SynthStream(const SynthConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    U_.resize(cfg.m * cfg.d);
    V_.resize(cfg.n * cfg.d);
    Rng ru = Rng::derive(cfg.seed, substream::kSynthItems);
    for (double& x : U_) x = ru.normal();
    Rng rv = Rng::derive(cfg.seed, substream::kSynthUsers);
    for (double& x : V_) x = rv.normal();
  }

  MatrixDims dims() const noexcept { return {cfg_.m, cfg_.n, 0}; }
  const SynthConfig& config() const noexcept { return cfg_; }

  template <class F>
  void for_each(F&& f) const {
    for (std::uint64_t i = 0; i < cfg_.m; ++i) for_each_in_row(i, f);
  }

  /// Generates row i alone; rows are independent of each other.
  template <class F>
  void for_each_in_row(std::uint64_t i, F&& f) const {
    const double keep = 1.0 - static_cast<double>(i) / static_cast<double>(cfg_.m);
    Rng rng = Rng::derive(cfg_.seed, substream::kSynthRowBase + i);
    const double* u = U_.data() + i * cfg_.d;
    for (std::uint64_t j = 0; j < cfg_.n; ++j) {
      if (!(rng.uniform() < keep)) continue;
      const double* v = V_.data() + j * cfg_.d;
      double x = 0.0;
      for (std::uint64_t t = 0; t < cfg_.d; ++t) x += u[t] * v[t];
      x += cfg_.noise_sd * rng.normal();
      if (x == 0.0) continue;  // measure-zero, but zeros are not stream entries
      f(EntryTriplet{i, j, x});
    }
  }

 private:
  SynthConfig cfg_;
  std::vector<double> U_;
  std::vector<double> V_;
};

/// Materializes the stream.
inline std::vector<EntryTriplet> generate(const SynthConfig& cfg) {
  SynthStream st(cfg);
  std::vector<EntryTriplet> out;
  st.for_each([&](const EntryTriplet& e) { out.push_back(e); });
  return out;
}

}  // namespace sketchstream
