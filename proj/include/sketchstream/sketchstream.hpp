#pragma once

#include "sketchstream/core_types.hpp"
#include "sketchstream/distribution.hpp"
#include "sketchstream/error.hpp"
#include "sketchstream/evaluation.hpp"
#include "sketchstream/linalg.hpp"
#include "sketchstream/matrix_market.hpp"
#include "sketchstream/objectives.hpp"
#include "sketchstream/pipeline.hpp"
#include "sketchstream/rng.hpp"
#include "sketchstream/sketch.hpp"
#include "sketchstream/sketch_codec.hpp"
#include "sketchstream/spectral.hpp"
#include "sketchstream/stats.hpp"
#include "sketchstream/stream_sampler.hpp"
#include "sketchstream/synth.hpp"
#include "sketchstream/variates.hpp"
