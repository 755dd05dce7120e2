#pragma once

// Two-pass sketching of an entry stream: profile, plan, sample, assemble.

#include <chrono>
#include <cstdint>
#include <optional>

#include "sketchstream/core_types.hpp"
#include "sketchstream/distribution.hpp"
#include "sketchstream/sketch.hpp"
#include "sketchstream/stats.hpp"
#include "sketchstream/stream_sampler.hpp"

namespace sketchstream {

struct SketchOptions {
  PlanOptions plan;
  std::uint64_t s = 1000;
  double delta = kDefaultDelta;
  std::uint64_t seed = 0;
  bool assume_uniform_z = false;  // skip the profile pass: z_i = 1 for all rows
};

struct SketchRun {
  SamplingPlan plan;
  SketchMatrix sketch;
  std::uint64_t spill_records = 0;
  double profile_seconds = 0.0;
  double sample_seconds = 0.0;
};

/// Runs the profile pass (unless z is assumed uniform), solves the plan, and
/// samples in a second pass. Trimmed L2 adds a pass to measure the kept mass.
template <EntryStream S, SpillStore Store>
SketchRun sketch_stream(const S& stream, const SketchOptions& opts, Store& store) {
  using clock = std::chrono::steady_clock;
  const MatrixDims dims = stream.dims();
  dims.validate();
  if (opts.assume_uniform_z && !is_row_based(opts.plan.scheme)) {
    throw Error("assume-uniform-z applies only to row-based schemes");
  }
  SketchRun run;
  const auto t0 = clock::now();
  const RowProfile profile = opts.assume_uniform_z ? RowProfile::uniform(dims.m) : accumulate_row_profile(stream);
  run.plan = make_plan(opts.plan, profile, stream, opts.s, opts.delta);
  const auto t1 = clock::now();
  const SampleTally tally = sample_entries(stream, run.plan, opts.s, opts.seed, store);
  run.sketch = build_sketch(tally, run.plan, dims, opts.s);
  run.spill_records = tally.spill_records;
  const auto t2 = clock::now();
  run.profile_seconds = std::chrono::duration<double>(t1 - t0).count();
  run.sample_seconds = std::chrono::duration<double>(t2 - t1).count();
  return run;
}

}  // namespace sketchstream
