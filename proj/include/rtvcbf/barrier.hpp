#pragma once

#include <functional>
#include <memory>

#include "rtvcbf/plant.hpp"
#include "rtvcbf/types.hpp"

namespace rtvcbf {

/// Second-order jet of a time-varying barrier h(x, t) at one point.
struct BarrierJet {
  double value = 0.0;  // h
  Vector grad;         // dh/dx
  double dt = 0.0;     // dh/dt
  Matrix hess;         // d2h/dx2
  Vector grad_dt;      // d2h/dx dt
  double dtt = 0.0;    // d2h/dt2
};

/// Any C2 time-varying barrier that can report its analytic second-order jet.
class TimeVaryingBarrier {
 public:
  virtual ~TimeVaryingBarrier() = default;
  virtual BarrierJet jet(const Vector& x, double t) const = 0;
  double value(const Vector& x, double t) const { return jet(x, t).value; }
};

/// h(x, t) = (e - v_e t)^2 + (s - v_s t)^2 - (k r)^2 for an obstacle of
/// radius r whose centre starts at the origin and moves with (v_e, v_s).
class MovingCircleBarrier final : public TimeVaryingBarrier {
 public:
  struct Params {
    double radius = 1.5;
    double lateral_velocity = 1.0;
    double longitudinal_velocity = -10.0;
    double clearance_multiplier = 2.0;
    int lateral_index = car_state::kE;
    int longitudinal_index = car_state::kS;
    bool operator==(const Params&) const = default;
  };

  MovingCircleBarrier(Params params, int state_dim);

  BarrierJet jet(const Vector& x, double t) const override;
  const Params& params() const noexcept { return p_; }
  /// Obstacle centre (e, s) at time t.
  std::pair<double, double> centre(double t) const;
  double clearance_radius() const { return p_.clearance_multiplier * p_.radius; }

 private:
  Params p_;
  int n_;
};

/// Barrier backed by a user-supplied analytic jet.
class CallbackBarrier final : public TimeVaryingBarrier {
 public:
  using JetFn = std::function<BarrierJet(const Vector&, double)>;
  explicit CallbackBarrier(JetFn fn) : fn_(std::move(fn)) {}
  BarrierJet jet(const Vector& x, double t) const override { return fn_(x, t); }

 private:
  JetFn fn_;
};

/// h, its modified Lie derivatives along x' = A x, and the filter scalars
///   c1 = Lf2_h + 2 alpha Lf_h + alpha^2 h,   c2 = Lg Lf_h.
struct BarrierEvaluation {
  double h = 0.0;
  double lf_h = 0.0;
  double lf2_h = 0.0;
  RowVector c2;
  double c1 = 0.0;
  double alpha = 0.0;
  /// Lg h; zero for a relative-degree-two barrier.
  RowVector lg_h;
  /// |d(Lf_h)/dx| * |B|_F, the scale used by the relative-degree tolerance.
  double c2_scale = 0.0;
};

BarrierEvaluation eval_barrier(const TimeVaryingBarrier& barrier, const LinearPlant& plant,
                               const Vector& x, double t, double alpha);

struct FdReport {
  bool finite_input = true;
  double dh_dt = 0.0;   // dh/dt vs central difference in t
  double grad_x = 0.0;  // dh/dx vs central differences per state
  double lf_h = 0.0;    // Lf_h vs d/dtau h along the drift flow
  double lf2_h = 0.0;   // Lf2_h vs d/dtau Lf_h along the drift flow
  double c2 = 0.0;      // c2 vs d/dtau Lf_h along each input column
  double max() const;
};

/// Central-difference audit of the analytic barrier derivatives. All
/// entries are max relative errors |a - f| / max(1, |a|, |f|).
FdReport fd_check(const TimeVaryingBarrier& barrier, const LinearPlant& plant, const Vector& x,
                  double t, double alpha, double step);

struct RelativeDegreeCheck {
  bool ok = false;
  double margin = 0.0;  // |c2| - eps
};

RelativeDegreeCheck relative_degree_ok(const BarrierEvaluation& eval, double eps);

/// Tolerance used in closed loop: coefficient * (1 + c2_scale).
double relative_degree_eps(const BarrierEvaluation& eval, double coefficient);

struct InitialMembership {
  bool in_safe_set = false;  // h0 >= 0
  bool in_c1_set = false;    // Lf_h0 + alpha h0 >= 0
  bool both() const { return in_safe_set && in_c1_set; }
};

InitialMembership initial_conditions_ok(const BarrierEvaluation& eval_at_zero);

}  // namespace rtvcbf
