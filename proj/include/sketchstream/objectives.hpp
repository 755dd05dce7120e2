#pragma once

// The epsilon objectives bounding the Bernstein tail of an entrywise sampling
// distribution, their surrogates, and oracle-scale optimality probes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "sketchstream/core_types.hpp"
#include "sketchstream/distribution.hpp"
#include "sketchstream/linalg.hpp"
#include "sketchstream/rng.hpp"

namespace sketchstream {

/// Entrywise sampling probabilities of `plan` on a dense matrix (0 off the support).
inline DenseMatrix plan_probabilities(const DenseMatrix& A, const SamplingPlan& plan) {
  DenseMatrix P(A.rows(), A.cols());
  CompensatedSum total;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (A(i, j) == 0.0) continue;
      P(i, j) = plan.entry_probability({i, j, A(i, j)});
      total += P(i, j);
    }
  if (!plan.normalized) {
    for (double& p : P.data()) p /= total.value();
  }
  return P;
}

namespace detail {

inline void require_support(const DenseMatrix& A, const DenseMatrix& P) {
  if (A.rows() != P.rows() || A.cols() != P.cols()) throw Error("probability matrix shape mismatch");
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j)
      if (A(i, j) != 0.0 && !(P(i, j) > 0.0)) {
        throw Error("zero sampling probability at a nonzero entry (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      }
}

// Largest eigenvalue of a symmetric operator: dense Jacobi up to 64, Lanczos beyond.
template <class Apply>
double lambda_max(std::size_t dim, Apply&& apply) {
  if (dim == 0) return 0.0;
  if (dim <= 64) {
    DenseMatrix S(dim, dim);
    std::vector<double> e(dim, 0.0), col(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      e[j] = 1.0;
      apply(std::span<const double>(e), std::span<double>(col));
      e[j] = 0.0;
      for (std::size_t i = 0; i < dim; ++i) S(i, j) = col[i];
    }
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = i + 1; j < dim; ++j) S(i, j) = S(j, i) = 0.5 * (S(i, j) + S(j, i));
    return jacobi_eigen(std::move(S)).values.front();
  }
  return lanczos_max_eigenvalue(dim, apply);
}

}  // namespace detail

struct SigmaR {
  double sigma = 0.0;
  double R = 0.0;
};

/// sigma^2 = max(||diag_i(sum_j A^2/p) - A A^T||, ||diag_j(sum_i A^2/p) - A^T A||)
/// and R = max over the nnz single-entry realizations B_1 = (A_ij/p_ij) e_i e_j^T
/// of ||B_1 - A||_2.
inline SigmaR sigma_R_exact(const DenseMatrix& A, const DenseMatrix& P) {
  detail::require_support(A, P);
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> r(m, 0.0), c(n, 0.0);
  std::vector<std::size_t> live_cols;
  for (std::size_t j = 0; j < n; ++j) {
    bool live = false;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      const double q = a * a / P(i, j);
      r[i] += q;
      c[j] += q;
      live = true;
    }
    if (live) live_cols.push_back(j);
  }
  // Column side restricted to nonzero columns; the rest of the operator is zero.
  const std::size_t nc = live_cols.size();
  DenseMatrix Ac(m, nc);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < nc; ++t) Ac(i, t) = A(i, live_cols[t]);

  std::vector<double> tmp_n(nc), tmp_m(m);
  const double row_side = detail::lambda_max(m, [&](std::span<const double> x, std::span<double> y) {
    Ac.apply_transpose(x, tmp_n);
    Ac.apply(tmp_n, y);
    for (std::size_t i = 0; i < m; ++i) y[i] = r[i] * x[i] - y[i];
  });
  const double col_side = detail::lambda_max(nc, [&](std::span<const double> x, std::span<double> y) {
    Ac.apply(x, tmp_m);
    Ac.apply_transpose(tmp_m, y);
    for (std::size_t t = 0; t < nc; ++t) y[t] = c[live_cols[t]] * x[t] - y[t];
  });
  SigmaR out;
  out.sigma = std::sqrt(std::max({0.0, row_side, col_side}));

  // R: work on the smaller Gram side. For M = A - c e_i e_j^T,
  // M M^T = G - c (a_j e_i^T + e_i a_j^T) + c^2 e_i e_i^T with a_j = A e_j.
  const bool rows_small = m <= nc;
  const DenseMatrix Bm = rows_small ? Ac : Ac.transposed();  // Gram side = Bm Bm^T
  const std::size_t g = Bm.rows();
  const DenseMatrix G = row_gram(Bm);
  const double normA = std::sqrt(std::max(0.0, detail::lambda_max(g, [&](std::span<const double> x, std::span<double> y) {
    G.apply(x, y);
  })));

  struct Cand {
    std::size_t gi, other;  // gram index, index along the other side
    double c, a;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < nc; ++t) {
      const double a = Ac(i, t);
      if (a == 0.0) continue;
      const double cv = a / P(i, live_cols[t]);
      cands.push_back(rows_small ? Cand{i, t, cv, a} : Cand{t, i, cv, a});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return std::abs(x.c) > std::abs(y.c); });

  double best = 0.0;
  std::vector<double> aj(g);
  for (const Cand& cd : cands) {
    if (normA + std::abs(cd.c) <= best) break;  // ||M|| <= ||A|| + |c|
    best = std::max(best, std::abs(cd.c - cd.a));   // |M_ij| is a lower bound
    for (std::size_t k = 0; k < g; ++k) aj[k] = Bm(k, cd.other);
    const std::size_t i = cd.gi;
    const double cv = cd.c;
    const double lam = detail::lambda_max(g, [&](std::span<const double> x, std::span<double> y) {
      G.apply(x, y);
      const double ajx = dot(aj, x);
      for (std::size_t k = 0; k < g; ++k) y[k] -= cv * aj[k] * x[i];
      y[i] += -cv * ajx + cv * cv * x[i];
    });
    best = std::max(best, std::sqrt(std::max(0.0, lam)));
  }
  out.R = best;
  return out;
}

struct SigmaRTilde {
  double sigma_tilde = 0.0;
  double R_tilde = 0.0;
};

/// sigma~^2 = max(max_i sum_j A^2/p, max_j sum_i A^2/p), R~ = max |A_ij|/p_ij.
inline SigmaRTilde sigma_R_tilde(const DenseMatrix& A, const DenseMatrix& P) {
  detail::require_support(A, P);
  std::vector<double> r(A.rows(), 0.0), c(A.cols(), 0.0);
  double rt = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      r[i] += a * a / P(i, j);
      c[j] += a * a / P(i, j);
      rt = std::max(rt, std::abs(a) / P(i, j));
    }
  SigmaRTilde out;
  const double mr = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  const double mc = c.empty() ? 0.0 : *std::max_element(c.begin(), c.end());
  out.sigma_tilde = std::sqrt(std::max(mr, mc));
  out.R_tilde = rt;
  return out;
}

/// Root of eps^2 - beta R eps - alpha^2 sigma^2 = 0: the smallest eps with
/// (m+n) exp(-s eps^2 / (sigma^2 + R eps / 3)) <= delta.
inline double eps1_from(double sigma, double R, const BernsteinParams& bp) {
  if (sigma == 0.0 && R == 0.0) return 0.0;
  const double bR = bp.beta * R;
  return 0.5 * (bR + std::sqrt(bR * bR + 4.0 * bp.alpha * bp.alpha * sigma * sigma));
}

/// (m+n) exp(-s eps^2 / (sigma^2 + R eps / 3)).
inline double bernstein_tail(double eps, double sigma, double R, std::uint64_t m_plus_n, std::uint64_t s) {
  const double denom = sigma * sigma + R * eps / 3.0;
  return static_cast<double>(m_plus_n) * std::exp(-static_cast<double>(s) * eps * eps / denom);
}

inline BernsteinParams params_for(const DenseMatrix& A, std::uint64_t s, double delta) {
  return BernsteinParams::make(A.rows() + A.cols(), s, delta);
}

inline double eps1(const DenseMatrix& A, const DenseMatrix& P, const BernsteinParams& bp) {
  const SigmaR sr = sigma_R_exact(A, P);
  return eps1_from(sr.sigma, sr.R, bp);
}

/// max_i [alpha sqrt(sum_j A^2/p) + beta max_j |A|/p].
inline double eps5(const DenseMatrix& A, const DenseMatrix& P, const BernsteinParams& bp) {
  detail::require_support(A, P);
  double best = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double q = 0.0, mx = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      q += a * a / P(i, j);
      mx = std::max(mx, std::abs(a) / P(i, j));
    }
    best = std::max(best, bp.alpha * std::sqrt(q) + bp.beta * mx);
  }
  return best;
}

/// Column-wise mirror of eps5.
inline double eps6(const DenseMatrix& A, const DenseMatrix& P, const BernsteinParams& bp) {
  return eps5(A.transposed(), P.transposed(), bp);
}

struct EpsilonReport {
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0, eps5 = 0.0, eps6 = 0.0;
  double sigma_exact = 0.0, sigma_tilde = 0.0, R_exact = 0.0, R_tilde = 0.0;
  BernsteinParams params;

  /// Inequalities that hold for every matrix and distribution.
  bool unconditional_chain_holds(double rel = 1e-9) const {
    const double r12 = eps2 > 0.0 ? eps1 / eps2 : 1.0;
    return r12 >= 1.0 / std::sqrt(2.0) - rel && r12 <= 1.0 + rel && eps4 <= eps3 * (1.0 + rel) &&
           eps3 <= 2.0 * eps4 * (1.0 + rel);
  }
};

inline EpsilonReport eps_chain_report(const DenseMatrix& A, const DenseMatrix& P, const BernsteinParams& bp) {
  EpsilonReport r;
  r.params = bp;
  const SigmaR ex = sigma_R_exact(A, P);
  const SigmaRTilde tl = sigma_R_tilde(A, P);
  r.sigma_exact = ex.sigma;
  r.R_exact = ex.R;
  r.sigma_tilde = tl.sigma_tilde;
  r.R_tilde = tl.R_tilde;
  r.eps1 = eps1_from(ex.sigma, ex.R, bp);
  r.eps2 = bp.alpha * ex.sigma + bp.beta * ex.R;
  r.eps3 = bp.alpha * tl.sigma_tilde + bp.beta * tl.R_tilde;
  r.eps5 = eps5(A, P, bp);
  r.eps6 = eps6(A, P, bp);
  r.eps4 = std::max(r.eps5, r.eps6);
  return r;
}

inline nlohmann::json to_json(const EpsilonReport& r) {
  return {{"eps1", r.eps1},
          {"eps2", r.eps2},
          {"eps3", r.eps3},
          {"eps4", r.eps4},
          {"eps5", r.eps5},
          {"eps6", r.eps6},
          {"sigma_exact", r.sigma_exact},
          {"sigma_tilde", r.sigma_tilde},
          {"R_exact", r.R_exact},
          {"R_tilde", r.R_tilde},
          {"params", {{"alpha", r.params.alpha}, {"beta", r.params.beta}, {"s", r.params.s}, {"delta", r.params.delta}}}};
}

/// Larger root of zeta^2 - 2 beta ||A||_1 zeta - alpha^2 sum_i z_i^2 = 0,
/// an upper bound on the equalized value zeta_1.
inline double zeta_upper_bound(const RowProfile& profile, const BernsteinParams& bp) {
  const double bl = bp.beta * profile.total_l1;
  return bl + std::sqrt(bl * bl + bp.alpha * bp.alpha * profile.sum_z_squared());
}

struct SampleComplexity {
  double theta_form = 0.0;     // nrd sr / eps^2 log(n/delta) + (sr nd / eps^2 log(n/delta))^{1/2}
  double explicit_form = 0.0;  // (4/3) L ||A||_1 / eps* + 4 L sum z^2 / eps*^2, eps* = eps ||A||_2
};

/// Budgets sufficient for ||A - B|| <= eps ||A||_2. The explicit form makes
/// each of 2 beta ||A||_1 and alpha sqrt(sum z^2) at most eps*/2, so the
/// zeta upper bound is at most eps*.
inline SampleComplexity sample_complexity_bound(const MatrixStats& st, MatrixDims dims, double eps, double delta) {
  if (!(eps > 0.0)) throw Error("target error must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0,1)");
  SampleComplexity out;
  const double ln = std::log(static_cast<double>(dims.n) / delta);
  out.theta_form = st.nrd * st.sr / (eps * eps) * ln + std::sqrt(st.sr * st.nd / (eps * eps) * ln);
  const double L = std::log(static_cast<double>(dims.m + dims.n) / delta);
  const double es = eps * st.spec;
  out.explicit_form = (4.0 / 3.0) * L * st.l1 / es + 4.0 * L * st.sum_row_l1_sq / (es * es);
  return out;
}

struct OptimalityResult {
  double ratio = 0.0;
  double eps_alg = 0.0;
  double eps_opt = 0.0;
  std::vector<double> p_alg;  // over the nonzeros in row-major order
  std::vector<double> p_opt;
  bool flagged = false;       // the local search hit its iteration cap
};

struct OptimalityOptions {
  int restarts = 100;
  int gradient_steps = 300;
  double h = 1e-6;
  std::uint64_t seed = 0;
};

/// eps1(p_alg) / eps1(p^) where p^ minimizes eps1 numerically over all
/// distributions on the nonzeros: softmax-parameterized gradient descent with
/// central differences from `restarts` random starts (plus p_alg), then a
/// pairwise mass-transfer pattern search from step 1e-2 down to 1e-6.
inline OptimalityResult near_optimality_check(const DenseMatrix& A, const DenseMatrix& P_alg,
                                              const BernsteinParams& bp, const OptimalityOptions& opts = {}) {
  const std::vector<EntryTriplet> nz = A.nonzeros();
  const std::size_t d = nz.size();
  if (d == 0) throw Error("optimality check needs a nonzero matrix");
  if (d > 8) throw Error("optimality check is limited to 8 nonzeros");

  DenseMatrix P(A.rows(), A.cols());
  auto objective = [&](const std::vector<double>& p) {
    for (std::size_t t = 0; t < d; ++t) P(nz[t].row, nz[t].col) = p[t];
    return eps1(A, P, bp);
  };
  auto softmax = [&](const std::vector<double>& x) {
    std::vector<double> p(d);
    const double mx = *std::max_element(x.begin(), x.end());
    double tot = 0.0;
    for (std::size_t t = 0; t < d; ++t) tot += p[t] = std::exp(x[t] - mx);
    for (double& v : p) v /= tot;
    return p;
  };

  OptimalityResult res;
  res.p_alg.resize(d);
  for (std::size_t t = 0; t < d; ++t) res.p_alg[t] = P_alg(nz[t].row, nz[t].col);
  {
    const double tot = std::accumulate(res.p_alg.begin(), res.p_alg.end(), 0.0);
    for (double& v : res.p_alg) v /= tot;
  }
  res.eps_alg = objective(res.p_alg);

  Rng rng = Rng::derive(opts.seed, substream::kSpectralStart + 1);
  std::vector<double> best_p = res.p_alg;
  double best = res.eps_alg;

  for (int r = 0; r <= opts.restarts; ++r) {
    std::vector<double> x(d);
    if (r == 0) {
      for (std::size_t t = 0; t < d; ++t) x[t] = std::log(std::max(res.p_alg[t], 1e-300));
    } else {
      for (double& v : x) v = 2.0 * rng.normal();
    }
    auto f = [&](const std::vector<double>& xx) { return objective(softmax(xx)); };
    double fx = f(x);
    double step = 1.0;
    for (int it = 0; it < opts.gradient_steps && step > 1e-10; ++it) {
      std::vector<double> grad(d);
      for (std::size_t t = 0; t < d; ++t) {
        auto xp = x, xm = x;
        xp[t] += opts.h;
        xm[t] -= opts.h;
        grad[t] = (f(xp) - f(xm)) / (2.0 * opts.h);
      }
      const double gn = norm2(grad);
      if (gn < 1e-12) break;
      // Backtracking along the negative gradient.
      bool moved = false;
      while (step > 1e-10) {
        std::vector<double> xn(d);
        for (std::size_t t = 0; t < d; ++t) xn[t] = x[t] - step * grad[t] / gn;
        const double fn = f(xn);
        if (fn < fx) {
          x = std::move(xn);
          fx = fn;
          step *= 1.5;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (fx < best) {
      best = fx;
      best_p = softmax(x);
    }
  }

  // Pattern search: move mass between pairs of coordinates.
  constexpr int kPatternCap = 20000;
  int evaluations = 0;
  for (double step = 1e-2; step >= 1e-6 && evaluations < kPatternCap; step *= 0.1) {
    bool improved = true;
    while (improved && evaluations < kPatternCap) {
      improved = false;
      for (std::size_t a = 0; a < d && evaluations < kPatternCap; ++a)
        for (std::size_t b = 0; b < d && evaluations < kPatternCap; ++b) {
          if (a == b) continue;
          const double mv = std::min(step, best_p[b] * 0.999999);
          if (mv <= 0.0) continue;
          auto q = best_p;
          q[a] += mv;
          q[b] -= mv;
          ++evaluations;
          const double fq = objective(q);
          if (fq < best) {
            best = fq;
            best_p = std::move(q);
            improved = true;
          }
        }
    }
  }
  res.flagged = evaluations >= kPatternCap;
  res.eps_opt = best;
  res.p_opt = std::move(best_p);
  res.ratio = res.eps_alg / res.eps_opt;
  return res;
}

}  // namespace sketchstream
