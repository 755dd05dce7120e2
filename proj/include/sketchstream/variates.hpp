#pragma once

// Exact binomial and hypergeometric variates.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/random/binomial_distribution.hpp>

#include "sketchstream/error.hpp"
#include "sketchstream/rng.hpp"

namespace sketchstream {

/// Means at or below this use sequential inversion; larger means use BTRD.
inline constexpr double kBinomialInversionMean = 30.0;

namespace detail {

// Inversion by sequential pmf summation, valid for p <= 1/2.
inline std::uint64_t binomial_inversion(std::uint64_t s, double p, Rng& rng) {
  const double q = 1.0 - p;
  const double ratio = p / q;
  double f = std::exp(static_cast<double>(s) * std::log1p(-p));
  double u = rng.uniform();
  std::uint64_t k = 0;
  while (u >= f) {
    u -= f;
    if (k == s) return s;  // roundoff left a sliver of mass past the support
    f *= ratio * static_cast<double>(s - k) / static_cast<double>(k + 1);
    ++k;
    if (f == 0.0) {
      // Past the numerically representable tail; restart keeps exactness.
      u = rng.uniform();
      k = 0;
      f = std::exp(static_cast<double>(s) * std::log1p(-p));
    }
  }
  return k;
}

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

/// Exact Binomial(s, p) variate.
inline std::uint64_t binomial_draw(std::uint64_t s, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("binomial probability outside [0,1]");
  if (s == 0 || p == 0.0) return 0;
  if (p == 1.0) return s;
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  std::uint64_t k;
  if (static_cast<double>(s) * pp <= kBinomialInversionMean) {
    k = detail::binomial_inversion(s, pp, rng);
  } else {
    // Hoermann's BTRD transformed rejection, exact.
    boost::random::binomial_distribution<std::int64_t, double> dist(static_cast<std::int64_t>(s), pp);
    k = static_cast<std::uint64_t>(dist(rng));
  }
  return flip ? s - k : k;
}

/// Exact hypergeometric variate: the number of the `draws` balls, thrown into
/// distinct bins chosen uniformly among `population`, that land in one of the
/// `marked` bins. Pr[t] = C(marked, t) C(population - marked, draws - t) / C(population, draws).
///
/// Sampled by inversion ordered outward from the mode, with the pmf carried by
/// its ratio recurrence so no factorials overflow.
inline std::uint64_t hypergeometric_draw(std::uint64_t population, std::uint64_t marked,
                                         std::uint64_t draws, Rng& rng) {
  if (marked > population || draws > population) throw Error("hypergeometric parameters out of range");
  const std::uint64_t lo = draws > population - marked ? draws - (population - marked) : 0;
  const std::uint64_t hi = std::min(draws, marked);
  if (lo == hi) return lo;

  const double N = static_cast<double>(population);
  const double K = static_cast<double>(marked);
  const double n = static_cast<double>(draws);
  auto up_ratio = [&](double t) {  // P(t+1) / P(t)
    return (K - t) * (n - t) / ((t + 1.0) * (N - K - n + t + 1.0));
  };
  auto down_ratio = [&](double t) {  // P(t-1) / P(t)
    return t * (N - K - n + t) / ((K - t + 1.0) * (n - t + 1.0));
  };

  auto mode = static_cast<std::uint64_t>(std::floor((n + 1.0) * (K + 1.0) / (N + 2.0)));
  mode = std::clamp(mode, lo, hi);
  const double mode_t = static_cast<double>(mode);
  const double p_mode = std::exp(detail::log_choose(K, mode_t) + detail::log_choose(N - K, n - mode_t) -
                                 detail::log_choose(N, n));

  for (;;) {
    double u = rng.uniform();
    if (u < p_mode) return mode;
    u -= p_mode;
    std::uint64_t up = mode, down = mode;
    double p_up = p_mode, p_down = p_mode;
    bool up_open = mode < hi, down_open = mode > lo;
    while (up_open || down_open) {
      if (up_open) {
        p_up *= up_ratio(static_cast<double>(up));
        ++up;
        if (u < p_up) return up;
        u -= p_up;
        up_open = up < hi && p_up > 0.0;
      }
      if (down_open) {
        p_down *= down_ratio(static_cast<double>(down));
        --down;
        if (u < p_down) return down;
        u -= p_down;
        down_open = down > lo && p_down > 0.0;
      }
    }
    // Roundoff in the pmf left u unassigned; redraw.
  }
}

}  // namespace sketchstream
