#pragma once

#include "tiltlab/potential.hpp"

namespace tiltlab {

// Tensor-product trapezoid grid for low-dimensional reference integrals.
// points_per_axis == 0 and radius == 0 select per-dimension defaults.
struct GridSpec {
  int points_per_axis = 0;
  double radius = 0.0;
};

// Every deterministic integral the grid can produce in one pass.
struct QuadratureProfile {
  double kl = 0.0;
  double fisher = 0.0;
  double laplacian_mean = 0.0;
  double x_grad = 0.0;
  double second_moment = 0.0;
  double entropy_gap = 0.0;
  double log_normalizer = 0.0;
};

QuadratureProfile quadrature_profile(const Potential& p, GridSpec grid = {});

// Single-functional entry point. Width is available only in one dimension and
// only when the gradient set is bounded.
double quadrature_oracle(const Potential& p, Functional functional, GridSpec grid = {});

}  // namespace tiltlab
