#pragma once

// Power iteration, block subspace iteration, and projection-quality metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sketchstream/linalg.hpp"
#include "sketchstream/rng.hpp"

namespace sketchstream {

struct SpectralOptions {
  double tol = 1e-9;
  int max_iter = 5000;
  std::uint64_t seed = 0;
};

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration on A^T A from a seeded Gaussian start. The estimate is a
/// lower bound on ||A||_2 (exact up to the convergence flag).
template <LinearOperator Op>
SpectralEstimate spectral_norm(const Op& A, const SpectralOptions& opts = {}) {
  const std::size_t m = A.rows(), n = A.cols();
  Rng rng = Rng::derive(opts.seed, substream::kSpectralStart);
  std::vector<double> x(n), y(m);
  for (double& v : x) v = rng.normal();
  double nx = norm2(x);
  for (double& v : x) v /= nx;

  SpectralEstimate est;
  double prev = -1.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    A.apply(x, y);
    const double lambda = dot(y, y);  // Rayleigh quotient of A^T A at unit x
    if (it == 1 && lambda == 0.0) {
      // A random start in the null space means A = 0 almost surely.
      throw Error("spectral norm of the zero matrix");
    }
    A.apply_transpose(y, x);
    nx = norm2(x);
    if (nx == 0.0) throw Error("spectral norm of the zero matrix");
    for (double& v : x) v /= nx;
    est.value = std::sqrt(lambda);
    est.iterations = it;
    if (prev > 0.0 && std::abs(lambda - prev) <= opts.tol * lambda) {
      est.converged = true;
      break;
    }
    prev = lambda;
  }
  // One more Rayleigh quotient at the final normalized iterate.
  A.apply(x, y);
  est.value = std::max(est.value, norm2(y));
  return est;
}

struct SubspaceOptions {
  int iterations = 200;
  std::size_t oversample = 8;
  std::uint64_t seed = 0;
};

/// Orthonormal basis of a leading eigen/singular subspace.
struct Subspace {
  std::size_t dim = 0;
  std::size_t rank = 0;
  Block basis;                // dim x rank, orthonormal columns
  std::vector<double> values; // leading eigenvalues (or singular values), descending
  bool rank_deficient = false;

  std::span<const double> vector(std::size_t t) const { return basis.col(t); }
};

/// Leading-k eigenvectors of a symmetric positive semidefinite operator
/// given as `apply(x, y)` (y = S x), by block subspace iteration with
/// re-orthonormalization each step and a final Rayleigh-Ritz projection.
template <class Apply>
Subspace top_k_eigen_psd(std::size_t dim, std::size_t k, Apply&& apply, const SubspaceOptions& opts = {}) {
  if (k == 0 || k > dim) throw Error("subspace rank must be in [1, dim]");
  const std::size_t b = std::min(dim, k + opts.oversample);
  Rng rng = Rng::derive(opts.seed, substream::kSpectralStart);
  Block Q(dim, b), Z(dim, b);
  for (double& v : Q.data) v = rng.normal();

  auto refill = [&](Block& X) {
    // Zero columns (rank collapse) are replaced by fresh random directions.
    for (int attempt = 0; attempt < 4; ++attempt) {
      const std::size_t r = orthonormalize(X);
      if (r == X.cols) return r;
      bool any = false;
      for (std::size_t j = 0; j < X.cols; ++j) {
        auto c = X.col(j);
        if (norm2(c) == 0.0) {
          for (double& v : c) v = rng.normal();
          any = true;
        }
      }
      if (!any) return r;
    }
    return orthonormalize(X);
  };

  std::size_t rank = refill(Q);
  for (int it = 0; it < opts.iterations; ++it) {
    for (std::size_t j = 0; j < b; ++j) apply(std::span<const double>(Q.col(j)), Z.col(j));
    std::swap(Q, Z);
    rank = refill(Q);
  }
  // Rayleigh-Ritz on span(Q).
  for (std::size_t j = 0; j < b; ++j) apply(std::span<const double>(Q.col(j)), Z.col(j));
  DenseMatrix T(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i; j < b; ++j) {
      const double t = 0.5 * (dot(Q.col(i), Z.col(j)) + dot(Q.col(j), Z.col(i)));
      T(i, j) = t;
      T(j, i) = t;
    }
  const SymmetricEigen eig = jacobi_eigen(T);

  Subspace out;
  out.dim = dim;
  out.rank = k;
  out.basis = Block(dim, k);
  out.values.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t t = 0; t < k; ++t) {
    auto u = out.basis.col(t);
    for (std::size_t j = 0; j < b; ++j) {
      const double c = eig.vectors(j, t);
      const auto q = Q.col(j);
      for (std::size_t i = 0; i < dim; ++i) u[i] += c * q[i];
    }
  }
  const double top = std::max(eig.values.front(), 0.0);
  out.rank_deficient = rank < k || eig.values[k - 1] <= 1e-12 * top;
  return out;
}

/// Top-k left singular vectors of A (eigenvectors of A A^T). `values` holds
/// singular values.
template <LinearOperator Op>
Subspace top_k_left_singular(const Op& A, std::size_t k, const SubspaceOptions& opts = {}) {
  std::vector<double> tmp(A.cols());
  Subspace s = top_k_eigen_psd(A.rows(), k,
                               [&](std::span<const double> x, std::span<double> y) {
                                 A.apply_transpose(x, tmp);
                                 A.apply(tmp, y);
                               },
                               opts);
  for (double& v : s.values) v = std::sqrt(std::max(v, 0.0));
  return s;
}

/// Top-k right singular vectors of A (eigenvectors of A^T A).
template <LinearOperator Op>
Subspace top_k_right_singular(const Op& A, std::size_t k, const SubspaceOptions& opts = {}) {
  return top_k_left_singular(TransposedView<Op>(A), k, opts);
}

/// Sum over the basis of ||A^T u_t||^2, i.e. ||P A||_F^2 for the projection P
/// onto the basis span.
template <LinearOperator Op>
double captured_left_mass(const Op& A, const Subspace& U) {
  std::vector<double> tmp(A.cols());
  double acc = 0.0;
  for (std::size_t t = 0; t < U.rank; ++t) {
    A.apply_transpose(U.vector(t), tmp);
    acc += dot(tmp, tmp);
  }
  return acc;
}

struct ProjectionQuality {
  double left_ratio = 0.0;
  double right_ratio = 0.0;
  bool flagged = false;  // some subspace was rank deficient
};

/// How right-side quality picks its basis: the sketch's right singular
/// vectors, or the matrix's own (literal reading; always gives ratio 1).
enum class RightBasis { sketch, matrix };

/// left = ||P_k^B A||_F / ||P_k^A A||_F, right = ||A Q_k^B||_F / ||A Q_k^A||_F.
template <LinearOperator OpA, LinearOperator OpB>
ProjectionQuality projection_quality(const OpA& A, const OpB& B, std::size_t k,
                                     const SubspaceOptions& opts = {},
                                     RightBasis right_basis = RightBasis::sketch) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw Error("projection quality needs equal shapes");
  const Subspace UA = top_k_left_singular(A, k, opts);
  const Subspace UB = top_k_left_singular(B, k, opts);
  bool b_zero = true;
  for (double v : UB.values) b_zero = b_zero && v == 0.0;
  if (b_zero) throw Error("projection quality is undefined for a zero sketch");

  const TransposedView<OpA> At(A);
  const Subspace VA = top_k_left_singular(At, k, opts);
  const Subspace VB = right_basis == RightBasis::sketch ? top_k_left_singular(TransposedView<OpB>(B), k, opts) : VA;

  ProjectionQuality q;
  const double denom_left = captured_left_mass(A, UA);
  const double denom_right = captured_left_mass(At, VA);
  q.left_ratio = std::sqrt(captured_left_mass(A, UB) / denom_left);
  q.right_ratio = std::sqrt(captured_left_mass(At, VB) / denom_right);
  q.flagged = UA.rank_deficient || UB.rank_deficient || VA.rank_deficient || VB.rank_deficient;
  return q;
}

}  // namespace sketchstream
