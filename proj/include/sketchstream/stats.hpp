#pragma once

// One-pass row profiles, matrix metrics, and the data-matrix condition check.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sketchstream/core_types.hpp"
#include "sketchstream/linalg.hpp"
#include "sketchstream/spectral.hpp"

namespace sketchstream {

/// Consumes a stream once and accumulates compensated row L1 and L2 masses,
/// optionally also column L1 norms (O(n) extra memory).
class ProfileAccumulator {
 public:
  ProfileAccumulator(MatrixDims dims, bool track_columns)
      : dims_(dims), row_l1_(dims.m), row_l2_(dims.m) {
    dims_.validate();
    if (track_columns) col_l1_.emplace(dims.n);
  }

  void add(const EntryTriplet& e) {
    validate_entry(e, dims_);
    const double a = std::abs(e.value);
    row_l1_[e.row] += a;
    row_l2_[e.row] += e.value * e.value;
    if (col_l1_) (*col_l1_)[e.col] += a;
    ++nnz_;
  }

  void merge(const ProfileAccumulator& other) {
    if (!(other.dims_ == dims_)) throw Error("cannot merge profiles of different shapes");
    for (std::size_t i = 0; i < row_l1_.size(); ++i) {
      row_l1_[i].merge(other.row_l1_[i]);
      row_l2_[i].merge(other.row_l2_[i]);
    }
    if (col_l1_ && other.col_l1_)
      for (std::size_t j = 0; j < col_l1_->size(); ++j) (*col_l1_)[j].merge((*other.col_l1_)[j]);
    nnz_ += other.nnz_;
  }

  RowProfile profile() const {
    RowProfile p;
    p.z.resize(row_l1_.size());
    std::vector<double> l2(row_l2_.size());
    CompensatedSum total, total_sq;
    for (std::size_t i = 0; i < row_l1_.size(); ++i) {
      p.z[i] = row_l1_[i].value();
      l2[i] = row_l2_[i].value();
      total += p.z[i];
      total_sq += l2[i];
    }
    p.total_l1 = total.value();
    p.total_l2sq = total_sq.value();
    p.per_row_l2sq = std::move(l2);
    p.nnz = nnz_;
    p.exact = true;
    return p;
  }

  /// max_j ||A^(j)||_1, when columns are tracked.
  std::optional<double> max_column_l1() const {
    if (!col_l1_) return std::nullopt;
    double best = 0.0;
    for (const auto& c : *col_l1_) best = std::max(best, c.value());
    return best;
  }

  std::uint64_t nnz() const noexcept { return nnz_; }

 private:
  MatrixDims dims_;
  std::vector<CompensatedSum> row_l1_;
  std::vector<CompensatedSum> row_l2_;
  std::optional<std::vector<CompensatedSum>> col_l1_;
  std::uint64_t nnz_ = 0;
};

template <EntryStream S>
RowProfile accumulate_row_profile(const S& stream) {
  ProfileAccumulator acc(stream.dims(), false);
  stream.for_each([&](const EntryTriplet& e) { acc.add(e); });
  return acc.profile();
}

template <class Range>
RowProfile accumulate_row_profile(const Range& entries, MatrixDims dims) {
  ProfileAccumulator acc(dims, false);
  for (const EntryTriplet& e : entries) acc.add(e);
  return acc.profile();
}

/// Metrics from an L1/L2 profile and a spectral-norm estimate.
inline MatrixStats compute_matrix_stats(const RowProfile& profile, double spectral_norm) {
  if (!profile.exact) throw Error("matrix statistics need an exact row profile");
  if (profile.total_l1 == 0.0 || spectral_norm <= 0.0) {
    throw Error("matrix statistics are undefined for the zero matrix");
  }
  MatrixStats st;
  st.l1 = profile.total_l1;
  st.frob = std::sqrt(profile.total_l2sq);
  st.spec = spectral_norm;
  st.sum_row_l1_sq = profile.sum_z_squared();
  const double f2 = profile.total_l2sq;
  st.sr = f2 / (spectral_norm * spectral_norm);
  st.nd = st.l1 * st.l1 / f2;
  st.nrd = st.sum_row_l1_sq / f2;
  return st;
}

/// Metrics of a dense matrix, with the spectral norm from power iteration.
inline MatrixStats compute_matrix_stats(const DenseMatrix& A, const SpectralOptions& opts = {1e-13, 20000, 0}) {
  ProfileAccumulator acc({A.rows(), A.cols(), 0}, false);
  for (const auto& e : A.nonzeros()) acc.add(e);
  const RowProfile p = acc.profile();
  if (p.total_l1 == 0.0) throw Error("matrix statistics are undefined for the zero matrix");
  return compute_matrix_stats(p, spectral_norm(A, opts).value);
}

/// Column L1 norms of a dense matrix; the maximum feeds the row-dominance check.
inline double max_column_l1(const DenseMatrix& A) {
  double best = 0.0;
  for (std::size_t j = 0; j < A.cols(); ++j) {
    CompensatedSum c;
    for (std::size_t i = 0; i < A.rows(); ++i) c += std::abs(A(i, j));
    best = std::max(best, c.value());
  }
  return best;
}

enum class ConditionStatus { pass, fail, unchecked };

inline const char* to_string(ConditionStatus c) {
  switch (c) {
    case ConditionStatus::pass: return "pass";
    case ConditionStatus::fail: return "fail";
    case ConditionStatus::unchecked: return "unchecked";
  }
  return "?";
}

struct DataMatrixReport {
  ConditionStatus row_dominance = ConditionStatus::unchecked;  // min row L1 >= max column L1
  ConditionStatus l1_spectral_ratio = ConditionStatus::unchecked;  // ||A||_1^2 / ||A||_2^2 >= 50 m
  ConditionStatus enough_rows = ConditionStatus::unchecked;  // m >= 50
  double min_row_l1 = 0.0;
  std::optional<double> max_col_l1;
  double l1_spectral_value = 0.0;

  bool is_data_matrix() const {
    return row_dominance == ConditionStatus::pass && l1_spectral_ratio == ConditionStatus::pass &&
           enough_rows == ConditionStatus::pass;
  }

  std::vector<std::string> failing() const {
    std::vector<std::string> out;
    if (row_dominance != ConditionStatus::pass) out.emplace_back("row_dominance");
    if (l1_spectral_ratio != ConditionStatus::pass) out.emplace_back("l1_spectral_ratio");
    if (enough_rows != ConditionStatus::pass) out.emplace_back("enough_rows");
    return out;
  }
};

/// Relative slack applied to the equality boundaries of the three conditions.
inline constexpr double kDataMatrixSlack = 1e-12;

/// Evaluates the three data-matrix conditions. Without column maxima the
/// row-dominance condition is an error unless `allow_unchecked` is set.
inline DataMatrixReport check_data_matrix(const RowProfile& profile, const MatrixStats& stats,
                                          std::optional<double> max_col_l1, MatrixDims dims,
                                          bool allow_unchecked = false) {
  if (!max_col_l1 && !allow_unchecked) throw Error("column L1 maxima are required for the row-dominance condition");
  if (profile.z.size() != dims.m) throw Error("profile length does not match row count");
  DataMatrixReport r;
  r.min_row_l1 = profile.z.empty() ? 0.0 : *std::min_element(profile.z.begin(), profile.z.end());
  r.max_col_l1 = max_col_l1;
  if (max_col_l1) {
    r.row_dominance = r.min_row_l1 >= *max_col_l1 * (1.0 - kDataMatrixSlack) ? ConditionStatus::pass
                                                                             : ConditionStatus::fail;
  }
  r.l1_spectral_value = stats.l1 * stats.l1 / (stats.spec * stats.spec);
  r.l1_spectral_ratio = r.l1_spectral_value >= 50.0 * static_cast<double>(dims.m) * (1.0 - kDataMatrixSlack)
                            ? ConditionStatus::pass
                            : ConditionStatus::fail;
  r.enough_rows = dims.m >= 50 ? ConditionStatus::pass : ConditionStatus::fail;
  return r;
}

}  // namespace sketchstream
