#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchstream/sketch.hpp"
#include "sketchstream/stats.hpp"
#include "support/test_support.hpp"

using namespace sketchstream;

namespace {

SampleTally tally_of(std::vector<TallyEntry> entries) {
  SampleTally t;
  for (const auto& e : entries) t.total += e.count;
  t.entries = std::move(entries);
  t.total_weight = 1.0;
  return t;
}

SketchMatrix sample_sketch(const VectorStream& st, const SamplingPlan& plan, std::uint64_t s, std::uint64_t seed) {
  MemorySpillStore store;
  const auto tally = sample_entries(st, plan, s, seed, store);
  return build_sketch(tally, plan, st.dims(), s);
}

// Monte Carlo mean of B over `runs` draws, with per-entry standard errors.
struct MeanAndSe {
  DenseMatrix mean, se;
};

MeanAndSe monte_carlo(const VectorStream& st, const SamplingPlan& plan, std::uint64_t s, int runs, std::uint64_t seed0) {
  const auto dims = st.dims();
  DenseMatrix sum(dims.m, dims.n), sq(dims.m, dims.n);
  for (int r = 0; r < runs; ++r) {
    const auto D = sketch_to_dense(sample_sketch(st, plan, s, seed0 + r));
    for (std::size_t i = 0; i < D.data().size(); ++i) {
      sum.data()[i] += D.data()[i];
      sq.data()[i] += D.data()[i] * D.data()[i];
    }
  }
  MeanAndSe out{DenseMatrix(dims.m, dims.n), DenseMatrix(dims.m, dims.n)};
  for (std::size_t i = 0; i < sum.data().size(); ++i) {
    const double mu = sum.data()[i] / runs;
    const double var = std::max(0.0, sq.data()[i] / runs - mu * mu);
    out.mean.data()[i] = mu;
    out.se.data()[i] = std::sqrt(var / runs);
  }
  return out;
}

}  // namespace

TEST(BuildSketch, OneByOne) {
  const std::vector<EntryTriplet> e = {{0, 0, 5.0}};
  const MatrixDims dims{1, 1, 1};
  const auto plan = make_plan(PlanOptions{}, accumulate_row_profile(e, dims), dims, 3);
  const auto B = build_sketch(tally_of({{e[0], 3}}), plan, dims, 3);
  ASSERT_EQ(B.entries.size(), 1u);
  EXPECT_EQ(B.entries[0].count, 3);
  EXPECT_DOUBLE_EQ(B.value(B.entries[0]), 5.0);
  EXPECT_DOUBLE_EQ(sketch_to_dense(B)(0, 0), 5.0);
}

TEST(BuildSketch, SingleSampleIsValueOverProbability) {
  // l1 plan on |A| = (2, 6): p(0,0) = 0.25.
  const std::vector<EntryTriplet> e = {{0, 0, 2.0}, {0, 1, -6.0}};
  const MatrixDims dims{1, 2, 2};
  PlanOptions o;
  o.scheme = Scheme::l1;
  const auto plan = make_plan(o, accumulate_row_profile(e, dims), dims, 1);
  ASSERT_DOUBLE_EQ(plan.entry_probability(e[0]), 0.25);
  const auto D = sketch_to_dense(build_sketch(tally_of({{e[0], 1}}), plan, dims, 1));
  EXPECT_DOUBLE_EQ(D(0, 0), 8.0);
  EXPECT_EQ(D(0, 1), 0.0);
  const auto N = sketch_to_dense(build_sketch(tally_of({{e[1], 1}}), plan, dims, 1));
  EXPECT_DOUBLE_EQ(N(0, 1), -6.0 / 0.75);
}

TEST(BuildSketch, MatchesPerEntryFormulaOnRandomTallies) {
  Rng rng(21);
  for (Scheme scheme : {Scheme::bernstein, Scheme::row_l1, Scheme::l1, Scheme::l2, Scheme::l2_trim}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto A = sstest::random_matrix(2 + rng.below(6), 2 + rng.below(8), 0.5, rng);
      const auto st = stream_of(A);
      PlanOptions o;
      o.scheme = scheme;
      o.trim_theta = 0.05;
      const std::uint64_t s = 1 + rng.below(300);
      const auto plan = make_plan(o, accumulate_row_profile(st), st, s);
      MemorySpillStore store;
      const auto tally = sample_entries(st, plan, s, trial, store);
      const auto B = build_sketch(tally, plan, st.dims(), s);
      B.validate();
      EXPECT_EQ(B.total_abs_count(), s);
      const auto D = sketch_to_dense(B);
      DenseMatrix expect(A.rows(), A.cols());
      for (const auto& t : tally.entries) {
        const auto& x = t.entry;
        expect(x.row, x.col) += static_cast<double>(t.count) / static_cast<double>(s) * x.value / plan.entry_probability(x);
      }
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j)
          ASSERT_NEAR(D(i, j), expect(i, j), 1e-12 * std::max(1.0, std::abs(expect(i, j)))) << to_string(scheme);
    }
  }
}

TEST(BuildSketch, ZeroRowsStayZero) {
  const std::vector<EntryTriplet> e = {{0, 0, 1.0}, {2, 1, 3.0}};
  const MatrixDims dims{3, 2, 2};
  const auto plan = make_plan(PlanOptions{}, accumulate_row_profile(e, dims), dims, 10);
  const auto B = sample_sketch(VectorStream(dims, e), plan, 10, 1);
  EXPECT_EQ(B.row_scale[1], 0.0);
  const auto D = sketch_to_dense(B);
  EXPECT_EQ(D(1, 0), 0.0);
  EXPECT_EQ(D(1, 1), 0.0);
}

TEST(BuildSketch, DuplicateStreamItemsCoalesce) {
  // The same cell appears twice with opposite signs; counts cancel.
  const std::vector<EntryTriplet> e = {{0, 0, 2.0}, {0, 0, -2.0}, {0, 1, 1.0}};
  const MatrixDims dims{1, 3, 3};
  PlanOptions o;
  o.scheme = Scheme::l1;
  const auto plan = make_plan(o, accumulate_row_profile(e, dims), dims, 4);
  const auto B = build_sketch(tally_of({{e[0], 2}, {e[1], 2}}), plan, dims, 4);
  EXPECT_TRUE(B.entries.empty());
  const auto C = build_sketch(tally_of({{e[0], 3}, {e[1], 1}}), plan, dims, 4);
  ASSERT_EQ(C.entries.size(), 1u);
  EXPECT_EQ(C.entries[0].count, 2);
  EXPECT_LE(C.total_abs_count(), 4u);
}

TEST(BuildSketch, Errors) {
  const std::vector<EntryTriplet> e = {{0, 0, 0.01}, {0, 1, 5.0}};
  const MatrixDims dims{1, 2, 2};
  PlanOptions o;
  o.scheme = Scheme::l2_trim;
  const VectorStream st(dims, e);
  const auto plan = make_plan(o, accumulate_row_profile(st), st, 2);
  EXPECT_THROW(build_sketch(tally_of({{e[0], 2}}), plan, dims, 2), Error);
  EXPECT_THROW(build_sketch(tally_of({{e[1], 1}}), plan, dims, 2), Error);
  EXPECT_THROW(build_sketch(tally_of({{e[1], 2}}), plan, MatrixDims{2, 2, 2}, 2), Error);
}

TEST(SketchToDense, SizeGuard) {
  SketchMatrix B;
  B.dims = {2000, 1000, 0};
  B.row_scale.assign(2000, 0.0);
  EXPECT_THROW(sketch_to_dense(B), Error);
}

TEST(Unbiasedness, RandomMatrixLargeBudget) {
  Rng rng(31);
  const auto A = sstest::random_matrix(4, 6, 0.7, rng);
  const auto st = stream_of(A);
  const std::uint64_t s = 1000000;
  const auto plan = make_plan(PlanOptions{}, accumulate_row_profile(st), st, s);
  const auto mc = monte_carlo(st, plan, s, 50, 100);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (A(i, j) == 0.0) {
        EXPECT_EQ(mc.mean(i, j), 0.0);
        continue;
      }
      EXPECT_LE(std::abs(mc.mean(i, j) - A(i, j)), 5.0 * mc.se(i, j) + 1e-12) << i << "," << j;
    }
}

TEST(Unbiasedness, ErrorDecaysAsInverseRootTrials) {
  Rng rng(32);
  const auto A = sstest::random_matrix(3, 4, 0.8, rng);
  const auto st = stream_of(A);
  const std::uint64_t s = 5;
  for (Scheme scheme : {Scheme::bernstein, Scheme::l1, Scheme::l2}) {
    PlanOptions o;
    o.scheme = scheme;
    const auto plan = make_plan(o, accumulate_row_profile(st), st, s);
    // RMS error over independent replicate batches at each trial count.
    std::vector<double> lx, ly;
    std::uint64_t seed = 1;
    for (int trials : {100, 400, 1600, 6400}) {
      double sq = 0.0;
      const int reps = 12;
      for (int rep = 0; rep < reps; ++rep) {
        DenseMatrix sum(A.rows(), A.cols());
        for (int t = 0; t < trials; ++t) {
          const auto D = sketch_to_dense(sample_sketch(st, plan, s, seed++));
          for (std::size_t q = 0; q < D.data().size(); ++q) sum.data()[q] += D.data()[q];
        }
        for (std::size_t q = 0; q < sum.data().size(); ++q) {
          const double d = sum.data()[q] / trials - A.data()[q];
          sq += d * d;
        }
      }
      lx.push_back(std::log(static_cast<double>(trials)));
      ly.push_back(0.5 * std::log(sq / reps));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < lx.size(); ++q) {
      num += (lx[q] - mx) * (ly[q] - my);
      den += (lx[q] - mx) * (lx[q] - mx);
    }
    const double slope = num / den;
    EXPECT_GE(slope, -0.65) << to_string(scheme);
    EXPECT_LE(slope, -0.35) << to_string(scheme);
  }
}
