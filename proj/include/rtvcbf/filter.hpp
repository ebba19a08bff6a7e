#pragma once

#include <limits>
#include <optional>
#include <string_view>

#include "rtvcbf/types.hpp"

namespace rtvcbf {

/// Data of one safety-filter solve:
///   minimize 1/2 |u - u0|^2
///   s.t.     c1 + c2 u - theta |c2| |u| >= 0,   |u| <= u_max (optional).
struct FilterProblem {
  Vector u0;
  double c1 = 0.0;
  RowVector c2;
  double theta = 0.0;
  std::optional<double> u_max;

  int m() const { return static_cast<int>(u0.size()); }
  /// Throws ContractError on malformed data, DegeneracyError if c2 = 0.
  void validate() const;
};

enum class FilterStatus {
  kBaselinePassthrough,
  kConstraintActive,
  kBallActive,
  kBothActive,
  kInfeasibleFallback,
};

std::string_view status_name(FilterStatus s);
std::optional<FilterStatus> parse_status(std::string_view name);

struct SolverOptions {
  double root_tol = 1e-12;     // |g| relative to max(1, |c1|, |c2||u|)
  int max_iterations = 200;
  double feas_abs = 1e-9;      // primal feasibility slack, absolute
  double feas_rel = 1e-9;      // and relative to the data scale
  bool route_nominal_to_qp = true;
};

/// Scaled KKT residuals; see docs/solver.md for the normalisation.
struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;
  double max() const;
};

struct FilterDecision {
  Vector u;
  double q = 0.0;  // 1/2 |u|^2, the epigraph slack
  FilterStatus status = FilterStatus::kBaselinePassthrough;
  double lambda = 0.0;  // multiplier of the barrier constraint
  double mu = 0.0;      // multiplier of |u| - u_max <= 0
  KktResiduals kkt;
  /// Input-bound feasibility margin; +inf without a bound.
  double feasibility_margin = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// g(u) = c1 + c2 u - theta |c2| |u|, the robust constraint left side.
double robust_constraint(const FilterProblem& p, const Vector& u);

/// Minimiser of c2 w over |w| <= theta |u|: -theta |u| c2^T / |c2|.
Vector worst_case_w(const Vector& u, const RowVector& c2, double theta);

/// Nominal filter with the closed-form projection (theta must be 0).
FilterDecision tvcbf_qp(const FilterProblem& p, const SolverOptions& opts = {});

/// Robust filter: structured solve of the rotated-cone program.
FilterDecision rtvcbf_socp(const FilterProblem& p, const SolverOptions& opts = {});

struct FeasibilityMargin {
  double margin = 0.0;     // u_max - threshold
  double threshold = 0.0;  // -c1 / ((1 - theta) |c2|)
  bool feasible = false;
};

/// Exact input-bound feasibility test for the robust program.
FeasibilityMargin feasibility_margin(double c1, const RowVector& c2, double theta, double u_max);

struct FeasiblePoint {
  Vector u;
  double q = 0.0;
};

/// Constructive certificate for c1 < 0:
///   u = -c1 / ((1 - theta) |c2|^2) c2^T,  q = 1/2 |u|^2.
FeasiblePoint feasible_point(double c1, const RowVector& c2, double theta);

/// Residuals of d against the KKT system of p, using d's multipliers.
KktResiduals kkt_residuals(const FilterProblem& p, const FilterDecision& d);

struct FallbackCommand {
  Vector u;
  bool degenerate = false;  // c2 = 0, u set to zero
};

/// Maximum-effort command u_max c2^T / |c2|.
FallbackCommand emergency_fallback(const RowVector& c2, double u_max);

}  // namespace rtvcbf
