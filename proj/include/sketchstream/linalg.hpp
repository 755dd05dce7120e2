#pragma once

// Small dense and sparse linear-algebra kernels: symmetric eigensolvers for
// oracle-scale Gram matrices, block orthonormalization, and a CSR matrix that
// satisfies the linear-operator interface used by the spectral routines.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "sketchstream/core_types.hpp"

namespace sketchstream {

template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
  { op.rows() } -> std::convertible_to<std::size_t>;
  { op.cols() } -> std::convertible_to<std::size_t>;
  op.apply(in, out);
  op.apply_transpose(in, out);
};

/// Swaps the roles of apply and apply_transpose.
template <LinearOperator Op>
class TransposedView {
 public:
  explicit TransposedView(const Op& op) : op_(op) {}
  std::size_t rows() const { return op_.cols(); }
  std::size_t cols() const { return op_.rows(); }
  void apply(std::span<const double> x, std::span<double> y) const { op_.apply_transpose(x, y); }
  void apply_transpose(std::span<const double> y, std::span<double> x) const { op_.apply(y, x); }

 private:
  const Op& op_;
};

/// Compressed sparse row matrix. Duplicate coordinates are summed.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  CsrMatrix(std::size_t rows, std::size_t cols, std::span<const EntryTriplet> entries)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {
    std::vector<EntryTriplet> sorted(entries.begin(), entries.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t t = 0; t < sorted.size(); ++t) {
      const auto& e = sorted[t];
      if (e.row >= rows || e.col >= cols) throw Error("triplet outside sparse bounds");
      if (!col_idx_.empty() && t > 0 && sorted[t - 1].row == e.row && sorted[t - 1].col == e.col) {
        values_.back() += e.value;
        continue;
      }
      col_idx_.push_back(e.col);
      values_.push_back(e.value);
      ++row_ptr_[e.row + 1];
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::uint64_t> row_cols(std::size_t i) const {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }

  void apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) acc += values_[t] * x[col_idx_[t]];
      y[i] = acc;
    }
  }

  void apply_transpose(std::span<const double> y, std::span<double> x) const {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double yi = y[i];
      if (yi == 0.0) continue;
      for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) x[col_idx_[t]] += values_[t] * yi;
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint64_t> col_idx_;
  std::vector<double> values_;
};

/// Column-major block of `cols` vectors, each of length `dim`.
struct Block {
  std::size_t dim = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Block() = default;
  Block(std::size_t d, std::size_t c) : dim(d), cols(c), data(d * c, 0.0) {}

  std::span<double> col(std::size_t j) { return {data.data() + j * dim, dim}; }
  std::span<const double> col(std::size_t j) const { return {data.data() + j * dim, dim}; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Modified Gram-Schmidt with one reorthogonalization pass. Columns that
/// collapse numerically are replaced by zero vectors; returns the rank found.
inline std::size_t orthonormalize(Block& Q) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < Q.cols; ++j) {
    auto v = Q.col(j);
    const double original = norm2(v);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        auto q = Q.col(i);
        const double c = dot(q, v);
        for (std::size_t t = 0; t < Q.dim; ++t) v[t] -= c * q[t];
      }
    }
    const double nv = norm2(v);
    if (original == 0.0 || nv <= 1e-13 * original) {
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    for (double& x : v) x /= nv;
    ++rank;
  }
  return rank;
}

struct SymmetricEigen {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // column t is the eigenvector for values[t]
};

/// Cyclic Jacobi eigensolver for a symmetric matrix. Iterates until the
/// off-diagonal Frobenius mass is below `tol` times the total Frobenius norm.
inline SymmetricEigen jacobi_eigen(DenseMatrix S, double tol = 1e-12, int max_sweeps = 100) {
  const std::size_t n = S.rows();
  if (S.cols() != n) throw Error("jacobi_eigen requires a square matrix");
  DenseMatrix V = DenseMatrix::identity(n);
  double total = 0.0;
  for (double x : S.data()) total += x * x;
  total = std::sqrt(total);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * S(p, q) * S(p, q);
    if (std::sqrt(off) <= tol * total || total == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = S(p, q);
        if (apq == 0.0) continue;
        const double app = S(p, p);
        const double aqq = S(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = S(k, p);
          const double skq = S(k, q);
          S(k, p) = c * skp - s * skq;
          S(k, q) = s * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = S(p, k);
          const double sqk = S(q, k);
          S(p, k) = c * spk - s * sqk;
          S(q, k) = s * spk + c * sqk;
        }
        S(p, q) = 0.0;
        S(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return S(a, a) > S(b, b); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t t = 0; t < n; ++t) {
    out.values[t] = S(order[t], order[t]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, t) = V(k, order[t]);
  }
  return out;
}

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal (diag, off) that are < x.
inline std::size_t sturm_count(std::span<const double> diag, std::span<const double> off, double x) {
  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    d = diag[i] - x - (i == 0 ? 0.0 : b2 / d);
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

inline double tridiagonal_max_eigenvalue(std::span<const double> diag, std::span<const double> off) {
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < diag.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < diag.size()) r += std::abs(off[i]);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const std::size_t n = diag.size();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(diag, off, mid) < n) {
      lo = mid;  // some eigenvalue is >= mid
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Largest eigenvalue of a symmetric operator y = S x of dimension `dim`,
/// by Lanczos with full reorthogonalization and Sturm bisection on the
/// tridiagonal projection.
template <class Apply>
double lanczos_max_eigenvalue(std::size_t dim, Apply&& apply, double tol = 1e-14,
                              std::uint64_t seed = 0x9E3779B97F4A7C15ull) {
  if (dim == 0) return 0.0;
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::vector<double> v(dim), w(dim);
  // Deterministic pseudo-random start vector.
  std::uint64_t x = seed;
  for (std::size_t i = 0; i < dim; ++i) {
    x ^= x >> 12, x ^= x << 25, x ^= x >> 27;
    v[i] = static_cast<double>((x * 0x2545F4914F6CDD1Dull) >> 11) * 0x1.0p-53 - 0.5;
  }
  double nv = norm2(v);
  for (double& t : v) t /= nv;
  double last = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    basis.push_back(v);
    apply(std::span<const double>(v), std::span<double>(w));
    const double a = dot(w, v);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        const double c = dot(w, q);
        for (std::size_t i = 0; i < dim; ++i) w[i] -= c * q[i];
      }
    }
    const double b = norm2(w);
    scale = std::max({scale, std::abs(a), b});
    const bool invariant = b <= 1e-13 * scale;
    if (invariant || k + 1 == dim || (k + 1) % 8 == 0) {
      const double top = detail::tridiagonal_max_eigenvalue(alpha, beta);
      if (invariant || k + 1 == dim || std::abs(top - last) <= tol * std::abs(top)) return top;
      last = top;
    }
    beta.push_back(b);
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / b;
  }
  return detail::tridiagonal_max_eigenvalue(alpha, beta);
}

/// Largest eigenvalue of a dense symmetric matrix: exact Jacobi up to 64x64,
/// Lanczos beyond that.
inline double max_eigenvalue_symmetric(const DenseMatrix& S) {
  if (S.rows() == 0) return 0.0;
  if (S.rows() <= 64) return jacobi_eigen(S).values.front();
  return lanczos_max_eigenvalue(S.rows(), [&](std::span<const double> x, std::span<double> y) {
    S.apply(x, y);
  });
}

/// A A^T for a dense matrix.
inline DenseMatrix row_gram(const DenseMatrix& A) {
  const std::size_t m = A.rows();
  DenseMatrix G(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = i; k < m; ++k) {
      const double g = dot(A.row(i), A.row(k));
      G(i, k) = g;
      G(k, i) = g;
    }
  return G;
}

/// Spectral norm of a dense matrix through the exact eigensolve of its
/// smaller Gram matrix.
inline double exact_spectral_norm(const DenseMatrix& A) {
  DenseMatrix G = A.rows() <= A.cols() ? row_gram(A) : row_gram(A.transposed());
  return std::sqrt(std::max(0.0, max_eigenvalue_symmetric(G)));
}

}  // namespace sketchstream
