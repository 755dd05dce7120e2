#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sketchstream/error.hpp"

namespace sketchstream {

/// One streamed nonzero A(row, col) = value.
struct EntryTriplet {
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  double value = 0.0;

  friend bool operator==(const EntryTriplet&, const EntryTriplet&) = default;
};

struct MatrixDims {
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::uint64_t nnz = 0;  // declared count; 0 when unknown

  void validate() const {
    if (m == 0 || n == 0) throw Error("matrix dimensions must be at least 1x1");
    // m * n may overflow for huge streams; compare in floating point.
    if (static_cast<long double>(nnz) >
        static_cast<long double>(m) * static_cast<long double>(n)) {
      throw Error("declared nnz exceeds m*n");
    }
  }

  friend bool operator==(const MatrixDims&, const MatrixDims&) = default;
};

inline void validate_entry(const EntryTriplet& e, const MatrixDims& dims) {
  if (e.row >= dims.m || e.col >= dims.n) {
    throw Error("entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                ") outside " + std::to_string(dims.m) + "x" + std::to_string(dims.n));
  }
  if (!std::isfinite(e.value)) throw Error("non-finite entry value");
  if (e.value == 0.0) throw Error("zero-valued entry in stream");
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Per-row L1 norms (or proportional estimates) plus the global masses the
/// samplers need.
struct RowProfile {
  std::vector<double> z;
  double total_l1 = 0.0;
  std::optional<std::vector<double>> per_row_l2sq;
  double total_l2sq = 0.0;
  std::uint64_t nnz = 0;
  bool exact = true;  // false when z is only proportional to the true row norms

  std::size_t rows() const noexcept { return z.size(); }

  double sum_z_squared() const {
    CompensatedSum acc;
    for (double zi : z) acc += zi * zi;
    return acc.value();
  }

  /// z_i = 1 for every row: the "ratios all equal one" profile.
  static RowProfile uniform(std::uint64_t m) {
    RowProfile p;
    p.z.assign(m, 1.0);
    p.total_l1 = static_cast<double>(m);
    p.exact = false;
    return p;
  }
};

struct MatrixStats {
  double l1 = 0.0;
  double frob = 0.0;
  double spec = 0.0;
  double sr = 0.0;
  double nd = 0.0;
  double nrd = 0.0;
  double sum_row_l1_sq = 0.0;
};

/// Row-major dense matrix for oracle-scale computations.
class DenseMatrix {
 public:
  static constexpr std::size_t kOracleLimit = 1'000'000;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  /// Builds from triplets; duplicates are summed.
  static DenseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                   std::span<const EntryTriplet> entries) {
    if (rows * cols > kOracleLimit) throw Error("dense materialization exceeds size guard");
    DenseMatrix A(rows, cols);
    for (const auto& e : entries) {
      if (e.row >= rows || e.col >= cols) throw Error("triplet outside dense bounds");
      A(e.row, e.col) += e.value;
    }
    return A;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  DenseMatrix transposed() const {
    DenseMatrix T(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) T(j, i) = (*this)(i, j);
    return T;
  }

  std::vector<EntryTriplet> nonzeros() const {
    std::vector<EntryTriplet> out;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        if ((*this)(i, j) != 0.0) out.push_back({i, j, (*this)(i, j)});
    return out;
  }

  std::size_t count_nonzeros() const {
    std::size_t c = 0;
    for (double v : data_) c += (v != 0.0);
    return c;
  }

  // y = A x
  void apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      const double* r = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
  }

  // x = A^T y
  void apply_transpose(std::span<const double> y, std::span<double> x) const {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double yi = y[i];
      if (yi == 0.0) continue;
      const double* r = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) x[j] += r[j] * yi;
    }
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// A re-playable source of entries: `dims()` plus `for_each(f)` which calls
/// `f(const EntryTriplet&)` once per streamed nonzero, identically on every call.
template <class S>
concept EntryStream = requires(const S& s) {
  { s.dims() } -> std::convertible_to<MatrixDims>;
  s.for_each([](const EntryTriplet&) {});
};

/// EntryStream over an in-memory vector.
class VectorStream {
 public:
  VectorStream(MatrixDims dims, std::vector<EntryTriplet> entries)
      : dims_(dims), entries_(std::move(entries)) {
    dims_.nnz = entries_.size();
  }

  MatrixDims dims() const noexcept { return dims_; }
  const std::vector<EntryTriplet>& entries() const noexcept { return entries_; }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& e : entries_) f(e);
  }

 private:
  MatrixDims dims_;
  std::vector<EntryTriplet> entries_;
};

inline VectorStream stream_of(const DenseMatrix& A) {
  return VectorStream({A.rows(), A.cols(), 0}, A.nonzeros());
}

}  // namespace sketchstream
