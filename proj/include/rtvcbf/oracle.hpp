#pragma once

#include "rtvcbf/filter.hpp"

namespace rtvcbf {

/// Reference solvers for the safety-filter program. Test use only; nothing
/// on the control path calls these.

struct OracleResult {
  Vector u;
  double objective = 0.0;  // 1/2 |u - u0|^2
  bool feasible = false;
  long evaluations = 0;
};

struct GridOracleOptions {
  double coarse_step = 1e-4;  // relative to the u scale (m = 1) or radians (m = 2)
  double final_step = 1e-8;
  long max_points = 4'000'000;
};

/// Dense brute-force minimiser for m in {1, 2}. For m = 1 the grid is over u
/// itself. For m = 2 the grid is over directions, with the exact best radius
/// along each direction. Each level re-grids a few cells around the best
/// point of the previous one.
OracleResult grid_oracle(const FilterProblem& p, const GridOracleOptions& opts = {});

struct InteriorPointOptions {
  double t_initial = 1.0;
  double t_growth = 10.0;
  double t_final = 1e13;
  double smoothing = 1e-10;  // |u| replaced by sqrt(|u|^2 + s^2) inside the barrier
  int newton_iterations = 100;
};

/// Log-barrier interior-point method with damped Newton steps, for any m.
OracleResult interior_point_oracle(const FilterProblem& p, const InteriorPointOptions& opts = {});

}  // namespace rtvcbf
