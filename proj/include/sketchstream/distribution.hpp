#pragma once

// Entry sampling distributions: the budget-dependent Bernstein row
// distribution and the Row-L1, L1, L2 and trimmed-L2 baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sketchstream/core_types.hpp"

namespace sketchstream {

inline constexpr double kDefaultDelta = 0.1;

/// alpha = sqrt(log((m+n)/delta)/s), beta = log((m+n)/delta)/(3s).
struct BernsteinParams {
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t s = 1;
  double delta = kDefaultDelta;

  static BernsteinParams make(std::uint64_t m_plus_n, std::uint64_t s, double delta = kDefaultDelta) {
    if (s < 1) throw Error("sample budget must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0,1)");
    if (m_plus_n < 1) throw Error("m + n must be positive");
    const double L = std::log(static_cast<double>(m_plus_n) / delta);
    BernsteinParams p;
    p.alpha = std::sqrt(L / static_cast<double>(s));
    p.beta = L / (3.0 * static_cast<double>(s));
    p.s = s;
    p.delta = delta;
    return p;
  }

  /// Explicit coefficients, e.g. to probe the alpha = 0 or beta = 0 limits.
  static BernsteinParams custom(double alpha, double beta) {
    if (alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0)) {
      throw Error("alpha and beta must be nonnegative and not both zero");
    }
    BernsteinParams p;
    p.alpha = alpha;
    p.beta = beta;
    return p;
  }
};

/// rho_i(zeta) = (t + sqrt(t^2 + u))^2, t = alpha z/(2 zeta), u = beta z/zeta.
/// The positive root involves no subtraction, so direct evaluation is stable.
inline double rho_of_zeta(double z, double zeta, const BernsteinParams& params) {
  if (!(zeta > 0.0)) throw Error("zeta must be positive");
  if (z == 0.0) return 0.0;
  const double t = params.alpha * z / (2.0 * zeta);
  const double u = params.beta * z / zeta;
  const double r = t + std::sqrt(t * t + u);
  return r * r;
}

struct ZetaSolution {
  double zeta = 0.0;
  std::vector<double> rho;  // normalized to sum to one
  int iterations = 0;
};

namespace detail {

inline double rho_sum(std::span<const double> z, double zeta, const BernsteinParams& params) {
  CompensatedSum acc;
  for (double zi : z) acc += rho_of_zeta(zi, zeta, params);
  return acc.value();
}

}  // namespace detail

/// Finds zeta with sum_i rho_i(zeta) = 1 by bisection on the strictly
/// decreasing map zeta -> sum rho_i(zeta), then renormalizes rho.
///
/// Bracket: at zeta = max(beta z_min, alpha z_max) a single row already has
/// rho >= 1; the upper end starts at alpha^2 sum z^2 + 2 beta sum z and doubles
/// until the sum drops below one. Bisection runs geometrically while the
/// bracket spans more than a factor of two and arithmetically after that,
/// until |sum - 1| <= 1e-15 or the bracket cannot be split further.
inline ZetaSolution solve_zeta(std::span<const double> z, const BernsteinParams& params) {
  double z_min = 0.0, z_max = 0.0, sum_z = 0.0, sum_z2 = 0.0;
  bool any = false;
  for (double zi : z) {
    if (!std::isfinite(zi) || zi < 0.0) throw Error("row profile entries must be finite and nonnegative");
    if (zi == 0.0) continue;
    z_min = any ? std::min(z_min, zi) : zi;
    z_max = std::max(z_max, zi);
    sum_z += zi;
    sum_z2 += zi * zi;
    any = true;
  }
  if (!any) throw Error("row profile is identically zero");

  double lo = std::max(params.beta * z_min, params.alpha * z_max);
  double hi = std::max(params.alpha * params.alpha * sum_z2 + 2.0 * params.beta * sum_z, lo);
  while (detail::rho_sum(z, hi, params) >= 1.0) hi *= 2.0;

  ZetaSolution sol;
  double mid = hi;
  for (int it = 0; it < 4000; ++it) {
    sol.iterations = it + 1;
    mid = hi > 2.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double f = detail::rho_sum(z, mid, params) - 1.0;
    if (std::abs(f) <= 1e-15) break;
    if (f > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Of the final candidates keep the one whose sum is closest to one.
  double best = mid, best_err = std::abs(detail::rho_sum(z, mid, params) - 1.0);
  for (double c : {lo, hi}) {
    const double e = std::abs(detail::rho_sum(z, c, params) - 1.0);
    if (e < best_err) best = c, best_err = e;
  }
  sol.zeta = best;
  sol.rho.resize(z.size());
  CompensatedSum total;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sol.rho[i] = rho_of_zeta(z[i], best, params);
    total += sol.rho[i];
  }
  const double t = total.value();
  for (double& r : sol.rho) r /= t;
  return sol;
}

enum class Scheme : std::uint8_t { bernstein = 0, row_l1 = 1, l1 = 2, l2 = 3, l2_trim = 4 };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::bernstein: return "bernstein";
    case Scheme::row_l1: return "row-l1";
    case Scheme::l1: return "l1";
    case Scheme::l2: return "l2";
    case Scheme::l2_trim: return "l2-trim";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "bernstein") return Scheme::bernstein;
  if (name == "row-l1" || name == "row_l1") return Scheme::row_l1;
  if (name == "l1") return Scheme::l1;
  if (name == "l2") return Scheme::l2;
  if (name == "l2-trim" || name == "l2_trim") return Scheme::l2_trim;
  throw Error("unknown sampling scheme '" + std::string(name) + "'");
}

inline bool is_row_based(Scheme s) { return s == Scheme::bernstein || s == Scheme::row_l1 || s == Scheme::l1; }

/// Which cells the trimmed-L2 mean square averages over.
enum class TrimDomain { nonzeros, all_cells };

struct PlanOptions {
  Scheme scheme = Scheme::bernstein;
  double trim_theta = 0.1;
  TrimDomain trim_domain = TrimDomain::nonzeros;
};

/// Sampling distribution over the nonzeros of one matrix.
///
/// Row-based schemes give p_ij = rho_i |A_ij| / z_i. L2 schemes give
/// p_ij = A_ij^2 / mass over kept entries. When the plan is not normalized
/// (an inexact z, e.g. all z_i = 1), `entry_probability` returns a weight
/// and the true probability is weight / (sum of weights over the stream).
class SamplingPlan {
 public:
  Scheme scheme = Scheme::bernstein;
  std::uint64_t s = 1;
  double delta = kDefaultDelta;
  std::vector<double> rho;            // row distribution (row-based schemes)
  std::vector<double> z;              // row profile used to build rho
  std::optional<double> zeta;         // bernstein only
  std::optional<BernsteinParams> params;
  double trim_theta = 0.0;            // l2_trim only
  double trim_cutoff = 0.0;           // entries with A^2 <= cutoff are dropped
  double l2_mass = 0.0;               // l2 normalizer
  bool normalized = true;

  std::uint64_t rows() const noexcept { return z.size(); }

  /// p_ij for one streamed entry (a weight when the plan is not normalized).
  double entry_probability(const EntryTriplet& e) const {
    if (e.row >= row_factor_.size()) throw Error("entry row outside the plan");
    if (is_row_based(scheme)) {
      const double f = row_factor_[e.row];
      if (f == 0.0) throw Error("row " + std::to_string(e.row) + " has zero profile mass but contains an entry");
      return f * std::abs(e.value);
    }
    const double v2 = e.value * e.value;
    if (scheme == Scheme::l2_trim && !(v2 > trim_cutoff)) return 0.0;
    return v2 / l2_mass;
  }

  /// Recomputes the per-row factors rho_i / z_i after the public fields change.
  void finalize() {
    row_factor_.assign(z.size(), 0.0);
    if (is_row_based(scheme)) {
      if (rho.size() != z.size()) throw Error("plan rho and z lengths differ");
      for (std::size_t i = 0; i < z.size(); ++i) row_factor_[i] = z[i] > 0.0 ? rho[i] / z[i] : 0.0;
    } else {
      row_factor_.assign(z.size(), 1.0);
    }
  }

 private:
  std::vector<double> row_factor_;
};

/// Mass retained by the trimmed-L2 rule: sum of A^2 over entries with A^2 > cutoff.
struct TrimMass {
  double cutoff = 0.0;
  double kept_l2sq = 0.0;
  std::uint64_t kept = 0;
};

inline double trim_cutoff(const RowProfile& profile, MatrixDims dims, double theta, TrimDomain domain) {
  if (theta < 0.0) throw Error("trim threshold must be nonnegative");
  const double cells = domain == TrimDomain::nonzeros
                           ? static_cast<double>(profile.nnz)
                           : static_cast<double>(dims.m) * static_cast<double>(dims.n);
  if (cells == 0.0) throw Error("cannot trim an empty matrix");
  return theta * profile.total_l2sq / cells;
}

template <EntryStream S>
TrimMass measure_trim_mass(const S& stream, double cutoff) {
  TrimMass t;
  t.cutoff = cutoff;
  CompensatedSum acc;
  stream.for_each([&](const EntryTriplet& e) {
    const double v2 = e.value * e.value;
    if (v2 > cutoff) {
      acc += v2;
      ++t.kept;
    }
  });
  t.kept_l2sq = acc.value();
  return t;
}

/// Builds a plan from a row profile. Trimmed L2 additionally needs the kept
/// mass (one extra pass, see measure_trim_mass).
inline SamplingPlan make_plan(const PlanOptions& opts, const RowProfile& profile, MatrixDims dims,
                              std::uint64_t s, double delta = kDefaultDelta,
                              std::optional<TrimMass> trim = std::nullopt) {
  if (s < 1) throw Error("sample budget must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0,1)");
  if (profile.z.size() != dims.m) throw Error("profile length does not match row count");
  SamplingPlan plan;
  plan.scheme = opts.scheme;
  plan.s = s;
  plan.delta = delta;
  plan.z = profile.z;
  plan.normalized = profile.exact;

  switch (opts.scheme) {
    case Scheme::bernstein: {
      const auto params = BernsteinParams::make(dims.m + dims.n, s, delta);
      ZetaSolution sol = solve_zeta(profile.z, params);
      plan.rho = std::move(sol.rho);
      plan.zeta = sol.zeta;
      plan.params = params;
      break;
    }
    case Scheme::row_l1:
    case Scheme::l1: {
      const bool squared = opts.scheme == Scheme::row_l1;
      CompensatedSum total;
      for (double zi : profile.z) total += squared ? zi * zi : zi;
      if (total.value() == 0.0) throw Error("row profile is identically zero");
      plan.rho.resize(profile.z.size());
      for (std::size_t i = 0; i < profile.z.size(); ++i) {
        const double zi = profile.z[i];
        plan.rho[i] = (squared ? zi * zi : zi) / total.value();
      }
      break;
    }
    case Scheme::l2: {
      if (!profile.exact) throw Error("L2 sampling needs an exact profile");
      if (profile.total_l2sq == 0.0) throw Error("L2 mass is zero");
      plan.l2_mass = profile.total_l2sq;
      break;
    }
    case Scheme::l2_trim: {
      if (!profile.exact) throw Error("trimmed L2 sampling needs an exact profile");
      if (!trim) throw Error("trimmed L2 sampling needs the kept mass");
      plan.trim_theta = opts.trim_theta;
      plan.trim_cutoff = trim->cutoff;
      if (trim->kept == 0 || trim->kept_l2sq == 0.0) throw Error("trim threshold removes every entry");
      plan.l2_mass = trim->kept_l2sq;
      break;
    }
  }
  plan.finalize();
  return plan;
}

/// Trimmed-L2 plan over an in-memory or replayable stream.
template <EntryStream S>
SamplingPlan make_plan(const PlanOptions& opts, const RowProfile& profile, const S& stream,
                       std::uint64_t s, double delta = kDefaultDelta) {
  std::optional<TrimMass> trim;
  if (opts.scheme == Scheme::l2_trim) {
    trim = measure_trim_mass(stream, trim_cutoff(profile, stream.dims(), opts.trim_theta, opts.trim_domain));
  }
  return make_plan(opts, profile, stream.dims(), s, delta, trim);
}

inline nlohmann::json plan_to_json(const SamplingPlan& plan) {
  nlohmann::json j;
  j["scheme"] = std::string(to_string(plan.scheme));
  j["s"] = plan.s;
  j["delta"] = plan.delta;
  j["zeta"] = plan.zeta ? nlohmann::json(*plan.zeta) : nlohmann::json(nullptr);
  j["rho"] = plan.rho;
  j["z"] = plan.z;
  j["normalized"] = plan.normalized;
  if (plan.params) {
    j["alpha"] = plan.params->alpha;
    j["beta"] = plan.params->beta;
  }
  if (!is_row_based(plan.scheme)) {
    j["l2_mass"] = plan.l2_mass;
    j["trim_theta"] = plan.trim_theta;
    j["trim_cutoff"] = plan.trim_cutoff;
  }
  return j;
}

inline SamplingPlan plan_from_json(const nlohmann::json& j) {
  SamplingPlan plan;
  try {
    plan.scheme = parse_scheme(j.at("scheme").get<std::string>());
    plan.s = j.at("s").get<std::uint64_t>();
    plan.delta = j.at("delta").get<double>();
    if (!j.at("zeta").is_null()) plan.zeta = j.at("zeta").get<double>();
    plan.rho = j.at("rho").get<std::vector<double>>();
    plan.z = j.at("z").get<std::vector<double>>();
    plan.normalized = j.value("normalized", true);
    plan.l2_mass = j.value("l2_mass", 0.0);
    plan.trim_theta = j.value("trim_theta", 0.0);
    plan.trim_cutoff = j.value("trim_cutoff", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed plan document: ") + e.what());
  }
  if (j.contains("alpha") && j.contains("beta")) {
    BernsteinParams bp = BernsteinParams::custom(j["alpha"].get<double>(), j["beta"].get<double>());
    bp.s = plan.s;
    bp.delta = plan.delta;
    plan.params = bp;
  }
  plan.finalize();
  return plan;
}

}  // namespace sketchstream
