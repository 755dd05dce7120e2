#pragma once

// The unbiased sketch B assembled from a sample tally.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "sketchstream/core_types.hpp"
#include "sketchstream/distribution.hpp"
#include "sketchstream/linalg.hpp"
#include "sketchstream/stream_sampler.hpp"

namespace sketchstream {

/// One stored cell of B. `count` is the signed sample count k_ij (the sign of
/// A_ij folded in). `value` is only meaningful for explicit-value sketches.
struct SketchEntry {
  std::uint64_t row = 0;
  std::uint64_t col = 0;
  std::int64_t count = 0;
  double value = 0.0;

  friend bool operator==(const SketchEntry&, const SketchEntry&) = default;
};

/// Row-based sketches decode B_ij = count * row_scale[i]. Explicit-value
/// sketches (L2 schemes, where A_ij / p_ij has no shared row factor) keep the
/// value per entry and leave row_scale at zero.
struct SketchMatrix {
  MatrixDims dims;
  std::uint64_t s = 0;
  Scheme scheme = Scheme::bernstein;
  bool explicit_values = false;
  std::vector<double> row_scale;
  std::vector<SketchEntry> entries;  // sorted by (row, col), unique

  double value(const SketchEntry& e) const {
    return explicit_values ? e.value : static_cast<double>(e.count) * row_scale[e.row];
  }

  std::uint64_t total_abs_count() const {
    std::uint64_t t = 0;
    for (const auto& e : entries) t += static_cast<std::uint64_t>(e.count < 0 ? -e.count : e.count);
    return t;
  }

  /// Checks sortedness, key uniqueness, bounds and row scales.
  void validate() const {
    if (row_scale.size() != dims.m) throw Error("row scale length does not match row count");
    for (double r : row_scale)
      if (!std::isfinite(r) || r < 0.0) throw Error("row scale must be finite and non-negative");
    for (std::size_t t = 0; t < entries.size(); ++t) {
      const auto& e = entries[t];
      if (e.row >= dims.m || e.col >= dims.n) throw Error("sketch entry outside the matrix");
      if (e.count == 0) throw Error("sketch entry with zero count");
      if (!std::isfinite(e.value)) throw Error("sketch entry value is not finite");
      if (!explicit_values && !(row_scale[e.row] > 0.0)) throw Error("sketch entry in a row with zero scale");
      if (t > 0) {
        const auto& p = entries[t - 1];
        if (p.row > e.row || (p.row == e.row && p.col >= e.col)) throw Error("sketch entries not sorted and unique");
      }
    }
    if (total_abs_count() > s) throw Error("sketch counts exceed the sample budget");
  }

  friend bool operator==(const SketchMatrix&, const SketchMatrix&) = default;
};

/// Assembles B from a tally drawn under `plan`.
///
/// For row-based plans B_ij = k_ij sign(A_ij) z_i W / (s rho_i), where W is 1
/// for normalized plans and the stream's total weight otherwise. Repeated
/// stream items for one cell are merged into a single signed count.
inline SketchMatrix build_sketch(const SampleTally& tally, const SamplingPlan& plan, MatrixDims dims, std::uint64_t s) {
  if (tally.total != s) throw Error("tally does not hold exactly s samples");
  if (plan.rows() != dims.m) throw Error("plan does not match the sketch shape");
  const double W = plan.normalized ? 1.0 : tally.total_weight;
  if (!(W > 0.0)) throw Error("tally carries no stream weight");
  const double sd = static_cast<double>(s);

  SketchMatrix B;
  B.dims = {dims.m, dims.n, 0};
  B.s = s;
  B.scheme = plan.scheme;
  B.explicit_values = !is_row_based(plan.scheme);
  B.row_scale.assign(dims.m, 0.0);

  struct Acc {
    std::int64_t count = 0;
    double value = 0.0;
  };
  std::map<std::pair<std::uint64_t, std::uint64_t>, Acc> cells;
  for (const auto& t : tally.entries) {
    const EntryTriplet& e = t.entry;
    if (e.row >= dims.m || e.col >= dims.n) throw Error("tally entry outside the matrix");
    const double w = plan.entry_probability(e);
    if (!(w > 0.0)) throw Error("tally holds an entry with zero sampling probability");
    Acc& a = cells[{e.row, e.col}];
    const auto k = static_cast<std::int64_t>(t.count);
    if (B.explicit_values) {
      a.count += k;
      a.value += static_cast<double>(t.count) * e.value * W / (sd * w);
    } else {
      a.count += e.value < 0.0 ? -k : k;
      B.row_scale[e.row] = plan.z[e.row] * W / (sd * plan.rho[e.row]);
    }
  }
  B.entries.reserve(cells.size());
  for (const auto& [key, a] : cells) {
    if (a.count == 0) continue;  // opposite-sign pieces cancelled
    B.entries.push_back({key.first, key.second, a.count, B.explicit_values ? a.value : 0.0});
  }
  return B;
}

/// Dense materialization for oracle-scale checks.
inline DenseMatrix sketch_to_dense(const SketchMatrix& B) {
  if (static_cast<long double>(B.dims.m) * static_cast<long double>(B.dims.n) >
      static_cast<long double>(DenseMatrix::kOracleLimit)) {
    throw Error("sketch too large for dense materialization");
  }
  DenseMatrix D(B.dims.m, B.dims.n);
  for (const auto& e : B.entries) D(e.row, e.col) = B.value(e);
  return D;
}

/// B as a sparse operator.
inline CsrMatrix sketch_to_csr(const SketchMatrix& B) {
  std::vector<EntryTriplet> t;
  t.reserve(B.entries.size());
  for (const auto& e : B.entries) t.push_back({e.row, e.col, B.value(e)});
  return CsrMatrix(B.dims.m, B.dims.n, t);
}

}  // namespace sketchstream
