#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchstream/pipeline.hpp"
#include "sketchstream/sketch_codec.hpp"
#include "sketchstream/synth.hpp"
#include "support/test_support.hpp"

using namespace sketchstream;

TEST(Pipeline, SingleEntryMatrixIsReproducedExactly) {
  const VectorStream st({3, 4, 0}, {{2, 1, -7.25}});
  for (Scheme scheme : {Scheme::bernstein, Scheme::row_l1, Scheme::l1, Scheme::l2, Scheme::l2_trim}) {
    for (std::uint64_t s : {1ull, 13ull, 100000ull}) {
      SketchOptions o;
      o.plan.scheme = scheme;
      o.s = s;
      MemorySpillStore store;
      const auto run = sketch_stream(st, o, store);
      const auto D = sketch_to_dense(decode_sketch(encode_sketch(run.sketch).bytes));
      EXPECT_DOUBLE_EQ(D(2, 1), -7.25) << to_string(scheme) << " " << s;
    }
  }
}

TEST(Pipeline, DeterministicGivenSeed) {
  SynthConfig c;
  c.m = 20;
  c.n = 500;
  const SynthStream st(c);
  SketchOptions o;
  o.s = 3000;
  o.seed = 42;
  MemorySpillStore a, b;
  const auto x = encode_sketch(sketch_stream(st, o, a).sketch).bytes;
  const auto y = encode_sketch(sketch_stream(st, o, b).sketch).bytes;
  EXPECT_EQ(x, y);
  o.seed = 43;
  EXPECT_NE(encode_sketch(sketch_stream(st, o, a).sketch).bytes, x);
  FileSpillStore f;
  o.seed = 42;
  EXPECT_EQ(encode_sketch(sketch_stream(st, o, f).sketch).bytes, x);
}

TEST(Pipeline, AssumeUniformZ) {
  Rng rng(101);
  const auto A = sstest::random_matrix(4, 5, 0.8, rng);
  const auto st = stream_of(A);
  SketchOptions o;
  o.assume_uniform_z = true;
  o.s = 40;
  // Unbiased without the profile pass.
  DenseMatrix sum(4, 5), sq(4, 5);
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    o.seed = r;
    MemorySpillStore store;
    const auto D = sketch_to_dense(sketch_stream(st, o, store).sketch);
    for (std::size_t q = 0; q < D.data().size(); ++q) {
      sum.data()[q] += D.data()[q];
      sq.data()[q] += D.data()[q] * D.data()[q];
    }
  }
  for (std::size_t q = 0; q < sum.data().size(); ++q) {
    const double mu = sum.data()[q] / runs;
    const double se = std::sqrt(std::max(0.0, sq.data()[q] / runs - mu * mu) / runs);
    EXPECT_LE(std::abs(mu - A.data()[q]), 5.0 * se + 1e-12);
  }
  o.plan.scheme = Scheme::l2;
  MemorySpillStore store;
  EXPECT_THROW(sketch_stream(st, o, store), Error);
}

TEST(Pipeline, TrimDomainAllCells) {
  Rng rng(102);
  const auto A = sstest::random_matrix(6, 8, 0.3, rng);
  const auto st = stream_of(A);
  SketchOptions o;
  o.plan.scheme = Scheme::l2_trim;
  o.plan.trim_theta = 1.0;
  o.plan.trim_domain = TrimDomain::all_cells;
  o.s = 500;
  MemorySpillStore store;
  const auto run = sketch_stream(st, o, store);
  double f2 = 0.0;
  for (double v : A.data()) f2 += v * v;
  EXPECT_NEAR(run.plan.trim_cutoff, f2 / 48.0, 1e-12);
  for (const auto& e : run.sketch.entries) EXPECT_GT(A(e.row, e.col) * A(e.row, e.col), run.plan.trim_cutoff);
}

TEST(Pipeline, ReportsRunMetadata) {
  SynthConfig c;
  c.m = 30;
  c.n = 2000;
  const SynthStream st(c);
  SketchOptions o;
  o.s = 5000;
  MemorySpillStore store;
  const auto run = sketch_stream(st, o, store);
  EXPECT_LE(run.sketch.total_abs_count(), o.s);
  EXPECT_GT(run.spill_records, 0u);
  EXPECT_GE(run.profile_seconds, 0.0);
  EXPECT_GE(run.sample_seconds, 0.0);
}
