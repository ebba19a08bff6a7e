#include "rtvcbf/barrier.hpp"

#include <algorithm>
#include <cmath>

#include "rtvcbf/errors.hpp"

namespace rtvcbf {

MovingCircleBarrier::MovingCircleBarrier(Params params, int state_dim)
    : p_(params), n_(state_dim) {
  if (!(p_.radius > 0.0) || !std::isfinite(p_.radius)) {
    throw ConfigError("barrier.radius must be > 0");
  }
  if (!(p_.clearance_multiplier >= 1.0) || !std::isfinite(p_.clearance_multiplier)) {
    throw ConfigError("barrier.clearance_multiplier must be >= 1");
  }
  if (!std::isfinite(p_.lateral_velocity) || !std::isfinite(p_.longitudinal_velocity)) {
    throw ConfigError("barrier velocities must be finite");
  }
  if (p_.lateral_index < 0 || p_.lateral_index >= n_ || p_.longitudinal_index < 0 ||
      p_.longitudinal_index >= n_ || p_.lateral_index == p_.longitudinal_index) {
    throw ConfigError("barrier.position_indices must name two distinct states");
  }
}

std::pair<double, double> MovingCircleBarrier::centre(double t) const {
  return {p_.lateral_velocity * t, p_.longitudinal_velocity * t};
}

BarrierJet MovingCircleBarrier::jet(const Vector& x, double t) const {
  const int ie = p_.lateral_index;
  const int is = p_.longitudinal_index;
  const double ve = p_.lateral_velocity;
  const double vs = p_.longitudinal_velocity;
  const double de = x(ie) - ve * t;
  const double ds = x(is) - vs * t;
  const double clearance = clearance_radius();

  BarrierJet j;
  j.value = de * de + ds * ds - clearance * clearance;
  j.grad = Vector::Zero(n_);
  j.grad(ie) = 2.0 * de;
  j.grad(is) = 2.0 * ds;
  j.dt = -2.0 * de * ve - 2.0 * ds * vs;
  j.hess = Matrix::Zero(n_, n_);
  j.hess(ie, ie) = 2.0;
  j.hess(is, is) = 2.0;
  j.grad_dt = Vector::Zero(n_);
  j.grad_dt(ie) = -2.0 * ve;
  j.grad_dt(is) = -2.0 * vs;
  j.dtt = 2.0 * ve * ve + 2.0 * vs * vs;
  return j;
}

BarrierEvaluation eval_barrier(const TimeVaryingBarrier& barrier, const LinearPlant& plant,
                               const Vector& x, double t, double alpha) {
  if (!(alpha > 0.0)) throw ContractError("eval_barrier: alpha must be > 0");
  if (x.size() != plant.n()) throw ContractError("eval_barrier: state dimension mismatch");

  const BarrierJet j = barrier.jet(x, t);
  const Matrix& A = plant.A();
  const Matrix& B = plant.B();
  const Vector ax = A * x;

  // Lf h = h_t + grad . Ax, and its own jet along the drift.
  const double lf_h = j.dt + j.grad.dot(ax);
  const Vector grad_lf = j.grad_dt + j.hess * ax + A.transpose() * j.grad;
  const double lf_dt = j.dtt + j.grad_dt.dot(ax);

  BarrierEvaluation ev;
  ev.alpha = alpha;
  ev.h = j.value;
  ev.lf_h = lf_h;
  ev.lf2_h = lf_dt + grad_lf.dot(ax);
  ev.c2 = grad_lf.transpose() * B;
  ev.lg_h = j.grad.transpose() * B;
  ev.c1 = ev.lf2_h + 2.0 * alpha * ev.lf_h + alpha * alpha * ev.h;
  ev.c2_scale = grad_lf.norm() * B.norm();
  return ev;
}

double FdReport::max() const {
  return std::max({dh_dt, grad_x, lf_h, lf2_h, c2});
}

namespace {

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

}  // namespace

FdReport fd_check(const TimeVaryingBarrier& barrier, const LinearPlant& plant, const Vector& x,
                  double t, double alpha, double step) {
  if (!(step > 0.0)) throw ContractError("fd_check: step must be > 0");
  FdReport r;
  if (!x.allFinite() || !std::isfinite(t)) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    r.finite_input = false;
    r.dh_dt = r.grad_x = r.lf_h = r.lf2_h = r.c2 = nan;
    return r;
  }

  const double d = step;
  const BarrierJet j = barrier.jet(x, t);
  const BarrierEvaluation ev = eval_barrier(barrier, plant, x, t, alpha);

  r.dh_dt = rel_err(j.dt, (barrier.value(x, t + d) - barrier.value(x, t - d)) / (2.0 * d));

  for (int i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += d;
    xm(i) -= d;
    const double fd = (barrier.value(xp, t) - barrier.value(xm, t)) / (2.0 * d);
    r.grad_x = std::max(r.grad_x, rel_err(j.grad(i), fd));
  }

  // Derivatives along the drift flow x -> x + tau A x, t -> t + tau.
  const Vector ax = plant.A() * x;
  const Vector xp = x + d * ax;
  const Vector xm = x - d * ax;
  r.lf_h = rel_err(ev.lf_h, (barrier.value(xp, t + d) - barrier.value(xm, t - d)) / (2.0 * d));

  const double lf_p = eval_barrier(barrier, plant, xp, t + d, alpha).lf_h;
  const double lf_m = eval_barrier(barrier, plant, xm, t - d, alpha).lf_h;
  r.lf2_h = rel_err(ev.lf2_h, (lf_p - lf_m) / (2.0 * d));

  for (int k = 0; k < plant.m(); ++k) {
    const Vector b = plant.B().col(k);
    const double up = eval_barrier(barrier, plant, x + d * b, t, alpha).lf_h;
    const double um = eval_barrier(barrier, plant, x - d * b, t, alpha).lf_h;
    r.c2 = std::max(r.c2, rel_err(ev.c2(k), (up - um) / (2.0 * d)));
  }
  return r;
}

RelativeDegreeCheck relative_degree_ok(const BarrierEvaluation& eval, double eps) {
  if (!(eps > 0.0)) throw ContractError("relative_degree_ok: eps must be > 0");
  const double norm = eval.c2.norm();
  return {norm > eps, norm - eps};
}

double relative_degree_eps(const BarrierEvaluation& eval, double coefficient) {
  return coefficient * (1.0 + eval.c2_scale);
}

InitialMembership initial_conditions_ok(const BarrierEvaluation& ev) {
  return {ev.h >= 0.0, ev.lf_h + ev.alpha * ev.h >= 0.0};
}

}  // namespace rtvcbf
