#include "rtvcbf/filter.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "rtvcbf/errors.hpp"

namespace rtvcbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Relative slack used when comparing a norm against u_max.
constexpr double kBallSlack = 1e-12;

double data_scale(const FilterProblem& p, double c2_norm, const Vector& u) {
  return std::max({1.0, std::abs(p.c1), c2_norm * u.norm()});
}

double primal_tol(const FilterProblem& p, double c2_norm, const Vector& u,
                  const SolverOptions& o) {
  return o.feas_abs + o.feas_rel * std::max(std::abs(p.c1), c2_norm * u.norm());
}

FilterDecision make_decision(const FilterProblem& p, Vector u, FilterStatus status,
                             double lambda, double mu, double margin, int iterations) {
  FilterDecision d;
  d.q = 0.5 * u.squaredNorm();
  d.u = std::move(u);
  d.status = status;
  d.lambda = lambda;
  d.mu = mu;
  d.feasibility_margin = margin;
  d.iterations = iterations;
  d.kkt = kkt_residuals(p, d);
  return d;
}

FilterDecision fallback_decision(const FilterProblem& p, double margin) {
  FilterDecision d;
  d.u = emergency_fallback(p.c2, *p.u_max).u;
  d.q = 0.5 * d.u.squaredNorm();
  d.status = FilterStatus::kInfeasibleFallback;
  d.feasibility_margin = margin;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  d.kkt = {nan, nan, nan, nan};
  return d;
}

// Decomposes u0 = along * a_hat + across * p_hat with p_hat orthogonal to a_hat.
struct Split {
  double along = 0.0;
  double across = 0.0;
  Vector p_hat;
};

Split split_along(const Vector& u0, const Vector& a_hat) {
  Split s;
  s.along = a_hat.dot(u0);
  Vector rest = u0 - s.along * a_hat;
  s.across = rest.norm();
  if (s.across > 0.0) {
    s.p_hat = rest / s.across;
  } else {
    s.p_hat = Vector::Zero(u0.size());
  }
  return s;
}

struct RootResult {
  double x = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Root of a nondecreasing function on [lo, hi] with f(hi) >= 0, bisection
// safeguarded Newton. Returns the feasible end of the final bracket.
template <class Eval>
RootResult monotone_root(Eval&& eval, double lo, double hi, double tol, int max_iterations) {
  RootResult r;
  double x = hi;
  auto [f, df, scale] = eval(hi);
  if (std::abs(f) <= tol * scale) {
    r.x = hi;
    r.converged = true;
    return r;
  }
  double width = hi - lo;
  for (int it = 1; it <= max_iterations; ++it) {
    r.iterations = it;
    double next = (df > 0.0) ? x - f / df : lo - 1.0;
    // Bisect whenever Newton leaves the bracket or stalls its shrinkage.
    if (!(next > lo && next < hi) || (it % 2 == 0 && hi - lo > 0.5 * width)) next = 0.5 * (lo + hi);
    if (it % 2 == 0) width = hi - lo;
    x = next;
    std::tie(f, df, scale) = eval(x);
    if (f >= 0.0) {
      hi = x;
      if (f <= tol * scale) {
        r.x = hi;
        r.converged = true;
        return r;
      }
    } else {
      lo = x;
    }
    if (hi - lo <= 4.0 * kEps * std::max(1.0, std::abs(hi))) {
      r.x = hi;
      r.converged = true;
      return r;
    }
  }
  r.x = hi;
  return r;
}

// u(lambda) = max(0, 1 - lambda theta |a| / |v|) v,  v = u0 + lambda a.
Vector shrunk_point(const Vector& u0, const Vector& a, double a_norm, double theta,
                    double lambda) {
  const Vector v = u0 + lambda * a;
  const double vn = v.norm();
  if (vn == 0.0) return Vector::Zero(u0.size());
  const double s = 1.0 - lambda * theta * a_norm / vn;
  if (s <= 0.0) return Vector::Zero(u0.size());
  return s * v;
}

struct LambdaSolve {
  Vector u;
  double lambda = 0.0;
  double mu = 0.0;
  int iterations = 0;
};

// Line case: u = u_max a_hat, multipliers from stationarity along a_hat.
LambdaSolve line_solution(const Vector& u0, const Vector& a_hat, double a_norm, double theta,
                          double umax) {
  LambdaSolve out;
  const double along = a_hat.dot(u0);
  out.u = umax * a_hat;
  out.lambda = std::max(0.0, umax - along) / ((1.0 - theta) * a_norm);
  out.mu = std::max(0.0, along - umax);
  return out;
}

std::string shortest(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void throw_nonconvergence(const char* phase, const FilterProblem& p, double lo,
                                       double hi, int iterations) {
  std::ostringstream os;
  os << "rtvcbf_socp: " << phase << " search did not converge after " << iterations
     << " iterations (bracket [" << shortest(lo) << ", " << shortest(hi) << "], c1=" << shortest(p.c1)
     << ", |c2|=" << shortest(p.c2.norm()) << ", theta=" << shortest(p.theta) << ")";
  throw SolverError(os.str());
}

// Barrier constraint active, input bound ignored.
LambdaSolve solve_constraint_active(const FilterProblem& p, const Vector& a, double a_norm,
                                    const SolverOptions& o) {
  const double theta = p.theta;
  const Vector& u0 = p.u0;

  auto eval = [&](double lambda) {
    const Vector v = u0 + lambda * a;
    const double vn = v.norm();
    const double s = vn > 0.0 ? 1.0 - lambda * theta * a_norm / vn : -1.0;
    if (s <= 0.0) {
      return std::array<double, 3>{p.c1, 0.0, std::max(1.0, std::abs(p.c1))};
    }
    const Vector u = s * v;
    const double un = s * vn;
    const double g = p.c1 + a.dot(u) - theta * a_norm * un;
    const double va = v.dot(a) / vn;
    const double ds = -theta * a_norm / vn + lambda * theta * a_norm * va / (vn * vn);
    const Vector du = ds * v + s * a;
    const double dg = a.dot(du) - theta * a_norm * (ds * vn + s * va);
    const double scale = std::max({1.0, std::abs(p.c1), a_norm * un});
    return std::array<double, 3>{g, dg, scale};
  };

  // Upper bracket seeded from the certificate multiplier, then doubled.
  const double g0 = eval(0.0)[0];
  double hi = std::max(std::abs(p.c1), std::abs(g0)) / ((1.0 - theta) * a_norm * a_norm);
  if (!(hi > 0.0)) hi = 1.0 / (a_norm * a_norm);
  int doublings = 0;
  while (eval(hi)[0] < 0.0) {
    hi *= 2.0;
    if (++doublings > o.max_iterations) throw_nonconvergence("bracket", p, 0.0, hi, doublings);
  }

  auto wrapped = [&](double lambda) {
    auto r = eval(lambda);
    return std::tuple<double, double, double>{r[0], r[1], r[2]};
  };
  auto root = monotone_root(wrapped, 0.0, hi, o.root_tol, o.max_iterations);
  if (!root.converged) throw_nonconvergence("constraint", p, 0.0, hi, root.iterations);

  LambdaSolve out;
  out.lambda = root.x;
  out.u = shrunk_point(u0, a, a_norm, theta, root.x);
  out.iterations = root.iterations + doublings;
  return out;
}

// Barrier constraint and input bound both active: u = u_max v / |v|.
LambdaSolve solve_both_active(const FilterProblem& p, const Vector& a, double a_norm,
                              const SolverOptions& o) {
  const double theta = p.theta;
  const double umax = *p.u_max;
  const Vector& u0 = p.u0;
  const Vector a_hat = a / a_norm;

  const Split sp = split_along(u0, a_hat);
  if (u0.size() == 1 || sp.across <= 1e-14 * std::max(1.0, std::abs(sp.along))) {
    return line_solution(u0, a_hat, a_norm, theta, umax);
  }
  // At the feasibility threshold the root sits at lambda = infinity.
  const double limit = p.c1 + umax * a_norm * (1.0 - theta);
  if (limit <= o.root_tol * std::max({1.0, std::abs(p.c1), a_norm * umax})) {
    return line_solution(u0, a_hat, a_norm, theta, umax);
  }

  auto eval = [&](double lambda) {
    const Vector v = u0 + lambda * a;
    const double vn = v.norm();
    const double cosine = v.dot(a) / vn;
    const double g = p.c1 + umax * cosine - theta * a_norm * umax;
    const double dcos = (a_norm * a_norm - cosine * cosine) / vn;
    const double scale = std::max({1.0, std::abs(p.c1), a_norm * umax});
    return std::tuple<double, double, double>{g, umax * dcos, scale};
  };

  double hi = std::max(1.0, sp.across) / a_norm;
  int doublings = 0;
  while (std::get<0>(eval(hi)) < 0.0) {
    hi *= 2.0;
    if (++doublings > o.max_iterations) throw_nonconvergence("bracket", p, 0.0, hi, doublings);
  }
  auto root = monotone_root(eval, 0.0, hi, o.root_tol, o.max_iterations);
  if (!root.converged) throw_nonconvergence("ball", p, 0.0, hi, root.iterations);

  LambdaSolve out;
  out.lambda = root.x;
  const Vector v = u0 + root.x * a;
  out.u = umax * v / v.norm();
  out.mu = v.norm() - umax - root.x * theta * a_norm;
  out.iterations = root.iterations + doublings;
  return out;
}

}  // namespace

void FilterProblem::validate() const {
  if (u0.size() < 1 || c2.size() != u0.size()) {
    throw ContractError("filter: u0 and c2 must have the same positive length");
  }
  if (!u0.allFinite() || !c2.allFinite() || !std::isfinite(c1)) {
    throw ContractError("filter: non-finite problem data");
  }
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw ContractError("filter: theta must lie in [0, 1)");
  }
  if (u_max && !(*u_max > 0.0 && std::isfinite(*u_max))) {
    throw ContractError("filter: u_max must be finite and > 0");
  }
  if (!(c2.norm() > 0.0)) {
    throw DegeneracyError("filter: c2 = 0, barrier has lost relative degree two");
  }
}

std::string_view status_name(FilterStatus s) {
  switch (s) {
    case FilterStatus::kBaselinePassthrough: return "baseline-passthrough";
    case FilterStatus::kConstraintActive: return "constraint-active";
    case FilterStatus::kBallActive: return "ball-active";
    case FilterStatus::kBothActive: return "both-active";
    case FilterStatus::kInfeasibleFallback: return "infeasible-fallback";
  }
  return "unknown";
}

std::optional<FilterStatus> parse_status(std::string_view name) {
  for (auto s : {FilterStatus::kBaselinePassthrough, FilterStatus::kConstraintActive,
                 FilterStatus::kBallActive, FilterStatus::kBothActive,
                 FilterStatus::kInfeasibleFallback}) {
    if (status_name(s) == name) return s;
  }
  return std::nullopt;
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, complementarity, dual});
}

double robust_constraint(const FilterProblem& p, const Vector& u) {
  return p.c1 + p.c2.dot(u) - p.theta * p.c2.norm() * u.norm();
}

Vector worst_case_w(const Vector& u, const RowVector& c2, double theta) {
  if (c2.size() != u.size()) throw ContractError("worst_case_w: dimension mismatch");
  if (!(theta >= 0.0)) throw ContractError("worst_case_w: theta must be >= 0");
  const double n = c2.norm();
  if (!(n > 0.0)) throw DegeneracyError("worst_case_w: c2 = 0");
  return (-theta * u.norm() / n) * c2.transpose();
}

FeasibilityMargin feasibility_margin(double c1, const RowVector& c2, double theta,
                                     double u_max) {
  if (!(theta >= 0.0 && theta < 1.0)) throw ContractError("feasibility_margin: theta in [0,1)");
  if (!(u_max > 0.0)) throw ContractError("feasibility_margin: u_max must be > 0");
  const double n = c2.norm();
  if (!(n > 0.0)) throw DegeneracyError("feasibility_margin: c2 = 0");
  FeasibilityMargin f;
  f.threshold = -c1 / ((1.0 - theta) * n);
  f.margin = u_max - f.threshold;
  f.feasible = c1 >= 0.0 || f.margin >= 0.0;
  return f;
}

FeasiblePoint feasible_point(double c1, const RowVector& c2, double theta) {
  if (!(c1 < 0.0)) throw ContractError("feasible_point: requires c1 < 0 (use u = 0)");
  if (!(theta >= 0.0 && theta < 1.0)) throw ContractError("feasible_point: theta in [0,1)");
  const double n2 = c2.squaredNorm();
  if (!(n2 > 0.0)) throw DegeneracyError("feasible_point: c2 = 0");
  FeasiblePoint fp;
  fp.u = (-c1 / ((1.0 - theta) * n2)) * c2.transpose();
  fp.q = 0.5 * fp.u.squaredNorm();
  return fp;
}

FallbackCommand emergency_fallback(const RowVector& c2, double u_max) {
  if (!(u_max > 0.0)) throw ContractError("emergency_fallback: u_max must be > 0");
  const double n = c2.norm();
  if (!(n > 0.0)) return {Vector::Zero(c2.size()), true};
  return {(u_max / n) * c2.transpose(), false};
}

KktResiduals kkt_residuals(const FilterProblem& p, const FilterDecision& d) {
  const Vector a = p.c2.transpose();
  const double a_norm = a.norm();
  const Vector& u = d.u;
  const double un = u.norm();
  const double g = robust_constraint(p, u);

  // Gradient of g; at u = 0 pick the subgradient closest to stationarity.
  Vector grad_g;
  if (un > 0.0) {
    grad_g = a - p.theta * a_norm * (u / un);
  } else if (d.lambda * p.theta * a_norm > 0.0) {
    Vector xi = (p.u0 + d.lambda * a) / (d.lambda * p.theta * a_norm);
    if (xi.norm() > 1.0) xi /= xi.norm();
    grad_g = a - p.theta * a_norm * xi;
  } else {
    grad_g = a;
  }

  Vector r = u - p.u0 - d.lambda * grad_g;
  if (p.u_max && un > 0.0) r += d.mu * (u / un);

  const double u_scale = std::max({1.0, p.u0.lpNorm<Eigen::Infinity>(),
                                   u.lpNorm<Eigen::Infinity>()});
  const double g_scale = data_scale(p, a_norm, u);

  KktResiduals k;
  k.stationarity = r.lpNorm<Eigen::Infinity>() / u_scale;
  k.primal = std::max(0.0, -g) / g_scale;
  double comp = std::abs(d.lambda * g);
  if (p.u_max) {
    k.primal = std::max(k.primal, std::max(0.0, un - *p.u_max) / std::max(1.0, *p.u_max));
    comp = std::max(comp, std::abs(d.mu * (*p.u_max - un)));
  }
  k.complementarity = comp / (u_scale * u_scale);
  k.dual = std::max({0.0, -d.lambda, -d.mu});
  return k;
}

FilterDecision tvcbf_qp(const FilterProblem& p, const SolverOptions& o) {
  p.validate();
  if (p.theta != 0.0) throw ContractError("tvcbf_qp: nominal filter requires theta = 0");

  const Vector a = p.c2.transpose();
  const double a2 = a.squaredNorm();
  const double a_norm = std::sqrt(a2);
  const Vector& u0 = p.u0;
  const double g0 = p.c1 + a.dot(u0);
  const double tol0 = primal_tol(p, a_norm, u0, o);

  double margin = kInf;
  if (p.u_max) {
    const auto fm = feasibility_margin(p.c1, p.c2, 0.0, *p.u_max);
    margin = fm.margin;
    if (!fm.feasible) return fallback_decision(p, margin);
  }
  const double umax = p.u_max.value_or(kInf);

  if (g0 >= 0.0 && u0.norm() <= umax) {
    return make_decision(p, u0, FilterStatus::kBaselinePassthrough, 0.0, 0.0, margin, 0);
  }

  if (p.u_max && u0.norm() > umax) {
    const double n0 = u0.norm();
    Vector ub = (umax / n0) * u0;
    if (p.c1 + a.dot(ub) >= -tol0) {
      return make_decision(p, std::move(ub), FilterStatus::kBallActive, 0.0, n0 - umax, margin, 0);
    }
  }

  if (g0 < 0.0) {
    const double lambda = -g0 / a2;
    Vector uh = u0 + lambda * a;
    if (uh.norm() <= umax * (1.0 + kBallSlack)) {
      return make_decision(p, std::move(uh), FilterStatus::kConstraintActive, lambda, 0.0,
                           margin, 0);
    }
  }

  // Both active: u on the sphere with a_hat . u_hat = kappa.
  const Vector a_hat = a / a_norm;
  const double kappa = std::clamp(-p.c1 / (a_norm * umax), -1.0, 1.0);
  const Split sp = split_along(u0, a_hat);
  const double across = std::sqrt(std::max(0.0, 1.0 - kappa * kappa));
  Vector u_hat = kappa * a_hat + across * sp.p_hat;
  double lambda = 0.0, mu = 0.0;
  if (across > 1e-12 && sp.across > 0.0) {
    mu = sp.across / across - umax;
    lambda = (kappa * sp.across / across - sp.along) / a_norm;
  } else {
    u_hat = a_hat;
    lambda = std::max(0.0, umax - sp.along) / a_norm;
    mu = std::max(0.0, sp.along - umax);
  }
  return make_decision(p, umax * u_hat, FilterStatus::kBothActive, std::max(0.0, lambda),
                       std::max(0.0, mu), margin, 0);
}

FilterDecision rtvcbf_socp(const FilterProblem& p, const SolverOptions& o) {
  p.validate();
  if (p.theta == 0.0 && o.route_nominal_to_qp) return tvcbf_qp(p, o);

  const Vector a = p.c2.transpose();
  const double a_norm = a.norm();
  const Vector& u0 = p.u0;
  const double n0 = u0.norm();
  const double g0 = robust_constraint(p, u0);

  double margin = kInf;
  if (p.u_max) {
    const auto fm = feasibility_margin(p.c1, p.c2, p.theta, *p.u_max);
    margin = fm.margin;
    // Accept rounding-level misses at the exact threshold.
    const bool at_boundary = fm.margin >= -4.0 * kEps * std::max(1.0, fm.threshold);
    if (!fm.feasible && !at_boundary) return fallback_decision(p, margin);
  }
  const double umax = p.u_max.value_or(kInf);

  if (g0 >= 0.0 && n0 <= umax) {
    return make_decision(p, u0, FilterStatus::kBaselinePassthrough, 0.0, 0.0, margin, 0);
  }

  if (p.u_max && n0 > umax) {
    Vector ub = (umax / n0) * u0;
    if (robust_constraint(p, ub) >= -primal_tol(p, a_norm, ub, o)) {
      return make_decision(p, std::move(ub), FilterStatus::kBallActive, 0.0, n0 - umax, margin, 0);
    }
  }

  if (g0 < 0.0) {
    LambdaSolve ls = solve_constraint_active(p, a, a_norm, o);
    if (ls.u.norm() <= umax * (1.0 + kBallSlack)) {
      return make_decision(p, std::move(ls.u), FilterStatus::kConstraintActive, ls.lambda, 0.0,
                           margin, ls.iterations);
    }
  }

  LambdaSolve ls = solve_both_active(p, a, a_norm, o);
  const double mu = ls.mu;
  if (mu < -1e-8 * std::max(1.0, umax)) {
    std::ostringstream os;
    os.precision(17);
    os << "rtvcbf_socp: inconsistent ball multiplier " << mu << " (lambda=" << ls.lambda
       << ", c1=" << p.c1 << ", |c2|=" << a_norm << ", theta=" << p.theta
       << ", u_max=" << umax << ")";
    throw SolverError(os.str());
  }
  return make_decision(p, std::move(ls.u), FilterStatus::kBothActive, ls.lambda,
                       std::max(0.0, mu), margin, ls.iterations);
}

}  // namespace rtvcbf
