#include "rtvcbf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rtvcbf/errors.hpp"
#include "rtvcbf/kernels.hpp"

namespace rtvcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(const FilterProblem& p, const Vector& u) { return 0.5 * (u - p.u0).squaredNorm(); }

bool admissible(const FilterProblem& p, const Vector& u, double slack) {
  const double g = p.c1 + p.c2.dot(u) - p.theta * p.c2.norm() * u.norm();
  const double scale = std::max({1.0, std::abs(p.c1), p.c2.norm() * u.norm()});
  if (g < -slack * scale) return false;
  return !p.u_max || u.norm() <= *p.u_max * (1.0 + slack);
}

// Minimum-norm point of the unbounded robust constraint, written out from
// the geometry rather than borrowed from the filter module.
Vector reference_point(const FilterProblem& p) {
  const Vector a = p.c2.transpose();
  if (p.c1 >= 0.0) return Vector::Zero(p.m());
  return (-p.c1 / ((1.0 - p.theta) * a.norm())) * (a / a.norm());
}

OracleResult grid_1d(const FilterProblem& p, const GridOracleOptions& o) {
  const auto& k = kernels::active();
  kernels::LineData d;
  d.u0 = p.u0(0);
  d.c1 = p.c1;
  d.a = p.c2(0);
  d.theta = p.theta;
  d.u_max = p.u_max.value_or(kInf);

  OracleResult out;
  const Vector ref = reference_point(p);
  const bool ref_ok = admissible(p, ref, 1e-12);
  const double R = ref_ok ? std::abs(ref(0) - d.u0) : kInf;
  double lo = d.u0 - R, hi = d.u0 + R;
  lo = std::max(lo, -d.u_max);
  hi = std::min(hi, d.u_max);
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw ContractError("grid_oracle: unbounded window");
  }
  const double scale = std::max({1.0, std::abs(d.u0), hi - lo});
  double step = o.coarse_step * scale;
  long count = static_cast<long>(std::floor((hi - lo) / step)) + 1;
  if (count > o.max_points) {
    step = (hi - lo) / static_cast<double>(o.max_points - 1);
    count = o.max_points;
  }

  double best_u = 0.0, best_f = kInf;
  auto scan = [&](double start, double h, long n) {
    const kernels::ArgMin r = k.line_argmin(d, start, h, static_cast<std::size_t>(n));
    out.evaluations += n;
    if (r.index >= 0 && r.value < best_f) {
      best_f = r.value;
      best_u = start + static_cast<double>(r.index) * h;
    }
  };
  scan(lo, step, count);
  if (ref_ok && objective(p, ref) < best_f) {
    best_f = objective(p, ref);
    best_u = ref(0);
  }
  if (!std::isfinite(best_f)) return out;
  while (step > o.final_step * scale) {
    const double h = step / 100.0;
    scan(best_u - 2.0 * step, h, 401);
    step = h;
  }
  out.u = Vector::Constant(1, best_u);
  out.objective = best_f;
  out.feasible = true;
  return out;
}

OracleResult grid_2d(const FilterProblem& p, const GridOracleOptions& o) {
  const auto& k = kernels::active();
  kernels::PolarData d;
  d.u0x = p.u0(0);
  d.u0y = p.u0(1);
  d.c1 = p.c1;
  d.ax = p.c2(0);
  d.ay = p.c2(1);
  d.theta = p.theta;
  d.u_max = p.u_max.value_or(kInf);

  OracleResult out;
  std::vector<double> cs, sn;
  double best_phi = 0.0, best_f = kInf;
  auto scan = [&](double start, double h, long n) {
    cs.resize(static_cast<std::size_t>(n));
    sn.resize(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      const double phi = start + static_cast<double>(i) * h;
      cs[static_cast<std::size_t>(i)] = std::cos(phi);
      sn[static_cast<std::size_t>(i)] = std::sin(phi);
    }
    const kernels::ArgMin r = k.polar_argmin(d, cs.data(), sn.data(), static_cast<std::size_t>(n));
    out.evaluations += n;
    if (r.index >= 0 && r.value < best_f) {
      best_f = r.value;
      best_phi = start + static_cast<double>(r.index) * h;
    }
  };

  double step = o.coarse_step;
  const long count = std::min(o.max_points, static_cast<long>(std::ceil(2.0 * kPi / step)));
  step = 2.0 * kPi / static_cast<double>(count);
  scan(-kPi, step, count);

  Vector u_best;
  const Vector ref = reference_point(p);
  const bool ref_ok = admissible(p, ref, 1e-12);
  if (std::isfinite(best_f)) {
    while (step > o.final_step) {
      const double h = step / 100.0;
      scan(best_phi - 2.0 * step, h, 401);
      step = h;
    }
    const double cx = std::cos(best_phi), cy = std::sin(best_phi);
    const double r = kernels::polar_radius(d, cx, cy);
    u_best = Vector(2);
    u_best << r * cx, r * cy;
    best_f = objective(p, u_best);
  }
  if (ref_ok && objective(p, ref) < best_f) {
    u_best = ref;
    best_f = objective(p, ref);
  }
  if (!std::isfinite(best_f)) return out;
  out.u = u_best;
  out.objective = best_f;
  out.feasible = true;
  return out;
}

}  // namespace

OracleResult grid_oracle(const FilterProblem& p, const GridOracleOptions& opts) {
  p.validate();
  if (p.m() == 1) return grid_1d(p, opts);
  if (p.m() == 2) return grid_2d(p, opts);
  throw ContractError("grid_oracle: only m = 1 and m = 2 are supported");
}

OracleResult interior_point_oracle(const FilterProblem& p, const InteriorPointOptions& o) {
  p.validate();
  const int m = p.m();
  const Vector a = p.c2.transpose();
  const double na = a.norm();
  const double tn = p.theta * na;
  const double sm2 = o.smoothing * o.smoothing;
  const bool ball = p.u_max.has_value();
  const double umax2 = ball ? *p.u_max * *p.u_max : kInf;

  OracleResult out;

  // Strictly interior start on the c2 ray.
  Vector u;
  if (p.c1 > 0.0) {
    u = Vector::Zero(m);
  } else {
    const double threshold = -p.c1 / ((1.0 - p.theta) * na);
    double r;
    if (ball) {
      if (!(threshold < *p.u_max)) return out;
      r = threshold > 0.0 ? 0.5 * (threshold + *p.u_max) : 0.5 * *p.u_max;
    } else {
      r = threshold > 0.0 ? 2.0 * threshold : 1.0;
    }
    u = r * (a / na);
  }

  auto g_of = [&](const Vector& v) { return p.c1 + a.dot(v) - tn * std::sqrt(v.squaredNorm() + sm2); };
  auto b_of = [&](const Vector& v) { return ball ? umax2 - v.squaredNorm() : 1.0; };
  auto merit = [&](const Vector& v, double t) {
    const double g = g_of(v), b = b_of(v);
    if (!(g > 0.0) || !(b > 0.0)) return kInf;
    return t * objective(p, v) - std::log(g) - (ball ? std::log(b) : 0.0);
  };
  if (!(g_of(u) > 0.0)) return out;

  const Matrix I = Matrix::Identity(m, m);
  for (double t = o.t_initial; t <= o.t_final * 1.0000001; t *= o.t_growth) {
    for (int it = 0; it < o.newton_iterations; ++it) {
      const double rho = std::sqrt(u.squaredNorm() + sm2);
      const double g = g_of(u);
      const Vector dg = a - tn * u / rho;
      const Matrix d2g = -tn * (I - u * u.transpose() / (rho * rho)) / rho;
      Vector grad = t * (u - p.u0) - dg / g;
      Matrix hess = t * I + dg * dg.transpose() / (g * g) - d2g / g;
      if (ball) {
        const double b = b_of(u);
        grad += 2.0 * u / b;
        hess += 2.0 * I / b + 4.0 * u * u.transpose() / (b * b);
      }
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      out.evaluations++;
      if (decrement <= 1e-20 * std::max(1.0, t)) break;
      double s = 1.0;
      const double f0 = merit(u, t);
      while (s > 1e-20) {
        const Vector cand = u + s * step;
        if (merit(cand, t) <= f0 - 0.25 * s * decrement) break;
        s *= 0.5;
      }
      if (s <= 1e-20) break;
      u += s * step;
    }
  }
  out.u = u;
  out.objective = objective(p, u);
  out.feasible = true;
  return out;
}

}  // namespace rtvcbf
