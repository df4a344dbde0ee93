#pragma once

#include <cstdint>

#include "phong/surfaces.hpp"

namespace phong::bench {

struct ProbeResult {
  SurfaceType surface = SurfaceType::phong;
  std::int64_t count = 0;
  double eval_seconds = 0.0;        // position and normal
  double derivative_seconds = 0.0;  // plus d/dv, d/dw
  // Estimated multiplications, divisions and square roots per evaluation.
  int eval_flops = 0;
  int derivative_flops = 0;
};

// Times `count` evaluations on the posed 320-facet ellipsoid, reporting the
// fastest of `repetitions` runs. count must be >= 1.
ProbeResult timing_probe(SurfaceType surface, std::int64_t count, int repetitions = 3);

}  // namespace phong::bench
