#pragma once

// Sketch quality through the small Gram matrices A A^T, B B^T and A B^T.
// With d = min(m, n) every quantity is read off d x d dense matrices, which
// keeps evaluation cheap when one side is short (the usual items x users case).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sketchstream/linalg.hpp"
#include "sketchstream/sketch.hpp"
#include "sketchstream/spectral.hpp"

namespace sketchstream {

/// X Y^T for two sparse matrices with equal column counts, dense X.rows() x Y.rows().
inline DenseMatrix sparse_cross_gram(const CsrMatrix& X, const CsrMatrix& Y) {
  if (X.cols() != Y.cols()) throw Error("cross Gram needs equal column counts");
  // Scatter the rows of the denser operand's partner: cost rows(X) * nnz(Y).
  const bool flip = static_cast<double>(X.rows()) * static_cast<double>(Y.nnz()) >
                    static_cast<double>(Y.rows()) * static_cast<double>(X.nnz());
  const CsrMatrix& S = flip ? Y : X;  // scattered
  const CsrMatrix& T = flip ? X : Y;  // traversed
  DenseMatrix out(X.rows(), Y.rows());
  std::vector<double> dense(S.cols(), 0.0);
  for (std::size_t i = 0; i < S.rows(); ++i) {
    const auto cols = S.row_cols(i);
    const auto vals = S.row_values(i);
    for (std::size_t q = 0; q < cols.size(); ++q) dense[cols[q]] = vals[q];
    for (std::size_t k = 0; k < T.rows(); ++k) {
      const auto tc = T.row_cols(k);
      const auto tv = T.row_values(k);
      double acc = 0.0;
      for (std::size_t q = 0; q < tc.size(); ++q) acc += dense[tc[q]] * tv[q];
      if (flip) {
        out(k, i) = acc;
      } else {
        out(i, k) = acc;
      }
    }
    for (std::size_t q = 0; q < cols.size(); ++q) dense[cols[q]] = 0.0;
  }
  return out;
}

inline CsrMatrix csr_transpose(const CsrMatrix& X) {
  std::vector<EntryTriplet> t;
  t.reserve(X.nnz());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto c = X.row_cols(i);
    const auto v = X.row_values(i);
    for (std::size_t q = 0; q < c.size(); ++q) t.push_back({c[q], i, v[q]});
  }
  return CsrMatrix(X.cols(), X.rows(), t);
}

struct EvaluationResult {
  ProjectionQuality quality;
  double spec_err = 0.0;  // ||A - B||_2 / ||A||_2
};

namespace detail {

inline double dense_quad(const DenseMatrix& G, std::span<const double> u) {
  std::vector<double> y(G.rows());
  G.apply(u, y);
  return dot(u, y);
}

}  // namespace detail

/// Precomputes A's Gram side once for repeated evaluation of sketches.
class GramEvaluator {
 public:
  GramEvaluator(CsrMatrix A, std::size_t k, SubspaceOptions opts = {})
      : k_(k), opts_(opts), transposed_(A.rows() > A.cols()) {
    A_ = transposed_ ? csr_transpose(A) : std::move(A);
    if (k_ == 0 || k_ > A_.rows()) throw Error("k must lie in [1, min(m, n)]");
    GA_ = sparse_cross_gram(A_, A_);
    const Subspace UA = top_k_eigen_psd(GA_.rows(), k_, [&](std::span<const double> x, std::span<double> y) { GA_.apply(x, y); }, opts_);
    best_mass_ = 0.0;
    for (double v : UA.values) best_mass_ += std::max(v, 0.0);
    norm_sq_ = max_eigenvalue_symmetric(GA_);
    if (!(best_mass_ > 0.0) || !(norm_sq_ > 0.0)) throw Error("evaluation of the zero matrix");
  }

  EvaluationResult evaluate(const CsrMatrix& B_in) const {
    const CsrMatrix B = transposed_ ? csr_transpose(B_in) : B_in;
    if (B.rows() != A_.rows() || B.cols() != A_.cols()) throw Error("sketch shape does not match the matrix");
    if (B.nnz() == 0) throw Error("projection quality is undefined for a zero sketch");
    const DenseMatrix GB = sparse_cross_gram(B, B);
    const DenseMatrix C = sparse_cross_gram(A_, B);  // A B^T
    const std::size_t d = GB.rows();

    const Subspace UB = top_k_eigen_psd(d, k_, [&](std::span<const double> x, std::span<double> y) { GB.apply(x, y); }, opts_);
    double left = 0.0, right = 0.0;
    bool flagged = UB.rank_deficient;
    const double top = std::max(UB.values.front(), 0.0);
    std::vector<double> cu(d);
    for (std::size_t t = 0; t < k_; ++t) {
      const auto u = UB.vector(t);
      left += detail::dense_quad(GA_, u);
      const double lam = UB.values[t];
      if (lam > 1e-12 * top && lam > 0.0) {
        C.apply(u, cu);  // A B^T u = sigma_t A v_t
        right += dot(cu, cu) / lam;
      } else {
        flagged = true;
      }
    }

    DenseMatrix D(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) D(i, j) = GA_(i, j) - C(i, j) - C(j, i) + GB(i, j);
    const double err_sq = std::max(0.0, max_eigenvalue_symmetric(D));

    EvaluationResult r;
    const double lr = std::sqrt(std::max(0.0, left) / best_mass_);
    const double rr = std::sqrt(std::max(0.0, right) / best_mass_);
    r.quality.left_ratio = transposed_ ? rr : lr;
    r.quality.right_ratio = transposed_ ? lr : rr;
    r.quality.flagged = flagged;
    r.spec_err = std::sqrt(err_sq / norm_sq_);
    return r;
  }

  EvaluationResult evaluate(const SketchMatrix& B) const { return evaluate(sketch_to_csr(B)); }

  double spectral_norm_sq() const noexcept { return norm_sq_; }

 private:
  std::size_t k_;
  SubspaceOptions opts_;
  bool transposed_;
  CsrMatrix A_;
  DenseMatrix GA_;
  double best_mass_ = 0.0;
  double norm_sq_ = 0.0;
};

}  // namespace sketchstream
