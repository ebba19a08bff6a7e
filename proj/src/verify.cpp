#include "rtvcbf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "json.hpp"
#include "rtvcbf/barrier.hpp"
#include "rtvcbf/errors.hpp"
#include "rtvcbf/kernels.hpp"
#include "rtvcbf/nonlinearity.hpp"
#include "rtvcbf/oracle.hpp"
#include "rtvcbf/sim.hpp"
#include "rtvcbf/trace.hpp"

namespace rtvcbf {

double ProblemSampler::log_uniform(double lo, double hi) {
  return std::exp(uniform(std::log(lo), std::log(hi)));
}

double ProblemSampler::normal() {
  const double u1 = rng_.uniform(), u2 = rng_.uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * kPi * u2);
}

FilterProblem ProblemSampler::problem(int m, double theta_max) {
  FilterProblem p;
  const double s = log_uniform(0.1, 10.0);
  p.u0 = Vector(m);
  for (int j = 0; j < m; ++j) p.u0(j) = s * normal();
  p.c2 = RowVector(m);
  do {
    for (int j = 0; j < m; ++j) p.c2(j) = uniform(-5.0, 5.0);
  } while (p.c2.norm() < 1e-3);
  p.c1 = uniform(-50.0, 50.0);
  p.theta = uniform(0.0, theta_max);
  return p;
}

FilterProblem ProblemSampler::bounded_problem(int m, double theta_max, bool allow_infeasible) {
  FilterProblem p = problem(m, theta_max);
  const double threshold = p.c1 < 0.0 ? -p.c1 / ((1.0 - p.theta) * p.c2.norm()) : 0.0;
  const double pick = rng_.uniform();
  if (allow_infeasible && pick < 0.2 && threshold > 0.0) {
    p.u_max = threshold * uniform(0.3, 0.95);
  } else {
    p.u_max = threshold * (1.0 + uniform(0.02, 1.0)) + log_uniform(0.01, 2.0);
  }
  return p;
}

FilterProblem ProblemSampler::certificate_problem(int m, double theta_max) {
  FilterProblem p = problem(m, theta_max);
  p.c1 = -log_uniform(1e-3, 50.0);
  return p;
}

std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::kDerivatives: return "derivatives";
    case Suite::kSolver: return "solver";
    case Suite::kCertificates: return "certificates";
    case Suite::kInvariance: return "invariance";
  }
  return "unknown";
}

std::optional<Suite> parse_suite(std::string_view name) {
  for (auto s : {Suite::kDerivatives, Suite::kSolver, Suite::kCertificates, Suite::kInvariance}) {
    if (suite_name(s) == name) return s;
  }
  return std::nullopt;
}

bool VerifyReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string VerifyReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    j.push_back({{"suite", r.suite},
                 {"property", r.name},
                 {"passed", r.passed},
                 {"measured", r.measured},
                 {"threshold", r.threshold},
                 {"samples", r.samples},
                 {"detail", r.detail}});
  }
  nlohmann::json doc = {{"passed", passed()}, {"properties", j}};
  return doc.dump(2) + "\n";
}

OracleComparison compare_with_grid(ProblemSampler& sampler, int instances, bool with_ball) {
  OracleComparison c;
  for (int i = 0; i < instances; ++i) {
    const int m = 1 + (i % 2);
    const FilterProblem p = with_ball ? sampler.bounded_problem(m, 0.95, true) : sampler.problem(m);
    const FilterDecision d = rtvcbf_socp(p);
    const OracleResult o = grid_oracle(p);
    ++c.instances;
    const bool solver_infeasible = d.status == FilterStatus::kInfeasibleFallback;
    if (solver_infeasible != !o.feasible) {
      ++c.infeasibility_mismatches;
      continue;
    }
    if (solver_infeasible) continue;
    c.max_u_error = std::max(c.max_u_error, (d.u - o.u).lpNorm<Eigen::Infinity>());
    c.max_kkt = std::max(c.max_kkt, d.kkt.max());
  }
  return c;
}

namespace {

struct Recorder {
  VerifyReport& report;
  std::string suite;
  void add(const std::string& name, double measured, double threshold, long samples,
           const std::string& detail = {}, bool pass_if_le = true) {
    const bool ok = std::isfinite(measured) && (pass_if_le ? measured <= threshold : measured >= threshold);
    report.results.push_back({suite, name, ok, measured, threshold, samples, detail});
  }
};

Vector car_box_state(ProblemSampler& s) {
  Vector x(6);
  x << s.uniform(-3.0, 3.0), s.uniform(-3.0, 3.0), s.uniform(-0.5, 0.5), s.uniform(-1.0, 1.0),
      s.uniform(-50.0, 50.0), s.uniform(20.0, 35.0);
  return x;
}

void derivatives_suite(const ScenarioConfig& cfg, std::uint64_t seed, Recorder& rec) {
  ProblemSampler s(seed);
  const LinearPlant plant = cfg.build_plant();
  if (plant.n() != car_state::kDim) throw ConfigError("derivatives suite needs the six-state car plant");
  const MovingCircleBarrier bar(cfg.barrier.circle, plant.n());
  const double alpha = cfg.barrier.alpha;
  const auto& bp = cfg.barrier.circle;
  double fd = 0.0, c1_id = 0.0, lgh = 0.0, comove = 0.0;
  const long n = 1000;
  for (long i = 0; i < n; ++i) {
    const Vector x = car_box_state(s);
    const double t = s.uniform(0.0, 3.0);
    fd = std::max(fd, fd_check(bar, plant, x, t, alpha, 1e-4).max());
    const BarrierEvaluation ev = eval_barrier(bar, plant, x, t, alpha);
    const double re = ev.lf2_h + 2.0 * alpha * ev.lf_h + alpha * alpha * ev.h;
    c1_id = std::max(c1_id, std::abs(ev.c1 - re) / std::max(1.0, std::abs(ev.c1)));
    lgh = std::max(lgh, ev.lg_h.lpNorm<Eigen::Infinity>());
    const double d = s.uniform(-1.0, 1.0);
    Vector y = x;
    y(bp.lateral_index) += bp.lateral_velocity * d;
    y(bp.longitudinal_index) += bp.longitudinal_velocity * d;
    comove = std::max(comove, std::abs(bar.value(y, t + d) - ev.h) / std::max(1.0, std::abs(ev.h)));
  }
  rec.add("fd_residual", fd, 1e-5, n, "analytic vs central differences, relative");
  rec.add("c1_identity", c1_id, 1e-15, n);
  rec.add("lg_h_zero", lgh, 1e-12, n, "first Lie derivative never sees the input");
  rec.add("co_moving_invariance", comove, 1e-12, n);
}

void solver_suite(std::uint64_t seed, Recorder& rec) {
  ProblemSampler s(seed);
  double max_kkt = 0.0;

  {
    SolverOptions no_route;
    no_route.route_nominal_to_qp = false;
    double err = 0.0;
    const long n = 500;
    for (long i = 0; i < n; ++i) {
      FilterProblem p = (i % 2) ? s.bounded_problem(1 + static_cast<int>(i % 3)) : s.problem(1 + static_cast<int>(i % 3));
      p.theta = 0.0;
      const FilterDecision a = rtvcbf_socp(p, no_route);
      const FilterDecision b = tvcbf_qp(p);
      err = std::max(err, (a.u - b.u).lpNorm<Eigen::Infinity>());
      if (a.status != FilterStatus::kInfeasibleFallback) max_kkt = std::max(max_kkt, a.kkt.max());
      if (b.status != FilterStatus::kInfeasibleFallback) max_kkt = std::max(max_kkt, b.kkt.max());
    }
    rec.add("theta_reduction", err, 1e-8, n, "general search at theta = 0 vs closed-form projection");
  }
  {
    const OracleComparison free = compare_with_grid(s, 100, false);
    const OracleComparison ball = compare_with_grid(s, 100, true);
    rec.add("grid_oracle_unbounded", free.max_u_error, 1e-4, free.instances);
    rec.add("grid_oracle_ball", ball.max_u_error, 1e-4, ball.instances);
    rec.add("grid_oracle_feasibility_agreement",
            static_cast<double>(free.infeasibility_mismatches + ball.infeasibility_mismatches), 0.0,
            free.instances + ball.instances);
    max_kkt = std::max({max_kkt, free.max_kkt, ball.max_kkt});
  }
  {
    double worst = 0.0;
    const long n = 200;
    for (long i = 0; i < n; ++i) {
      FilterProblem p = s.problem(1 + static_cast<int>(i % 3));
      double prev = -1.0;
      for (int k = 0; k <= 19; ++k) {
        p.theta = 0.05 * k;
        const FilterDecision d = rtvcbf_socp(p);
        const double obj = 0.5 * (d.u - p.u0).squaredNorm();
        if (prev >= 0.0) worst = std::max(worst, (prev - obj) / std::max(1.0, prev));
        prev = obj;
        max_kkt = std::max(max_kkt, d.kkt.max());
      }
    }
    rec.add("objective_monotone_in_theta", worst, 1e-9, n, "largest relative decrease");
  }
  {
    double err = 0.0;
    const long n = 300;
    for (long i = 0; i < n; ++i) {
      FilterProblem p = (i % 2) ? s.bounded_problem(1 + static_cast<int>(i % 3)) : s.problem(1 + static_cast<int>(i % 3));
      const FilterDecision a = rtvcbf_socp(p);
      const double k = s.log_uniform(1e-3, 1e3);
      p.c1 *= k;
      p.c2 *= k;
      const FilterDecision b = rtvcbf_socp(p);
      err = std::max(err, (a.u - b.u).lpNorm<Eigen::Infinity>() / std::max(1.0, a.u.lpNorm<Eigen::Infinity>()));
    }
    rec.add("homogeneity", err, 1e-8, n);
  }
  {
    double err = 0.0;
    const long n = 1000;
    for (long i = 0; i < n; ++i) {
      const FilterProblem p = s.problem(1 + static_cast<int>(i % 4));
      Vector u(p.m());
      for (int j = 0; j < p.m(); ++j) u(j) = 3.0 * s.normal();
      const Vector w = worst_case_w(u, p.c2, p.theta);
      const double lhs = p.c2.dot(u + w);
      const double rhs = p.c2.dot(u) - p.theta * p.c2.norm() * u.norm();
      err = std::max(err, std::abs(lhs - rhs) / std::max(1.0, p.c2.norm() * u.norm()));
      err = std::max(err, std::abs(w.norm() - p.theta * u.norm()) / std::max(1.0, u.norm()));
    }
    rec.add("worst_case_tightness", err, 1e-12, n);
  }
  rec.add("kkt_residuals", max_kkt, 1e-8, 0, "max over every solve in this suite");
}

void certificates_suite(std::uint64_t seed, Recorder& rec) {
  ProblemSampler s(seed);
  const std::size_t n = 10000;
  const std::size_t m = 2;
  std::vector<double> c1(n), theta(n), c2(n * m), u(n * m), res(n);
  std::vector<FilterProblem> probs;
  probs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FilterProblem p = s.certificate_problem(static_cast<int>(m));
    c1[i] = p.c1;
    theta[i] = p.theta;
    for (std::size_t j = 0; j < m; ++j) c2[j * n + i] = p.c2(static_cast<Eigen::Index>(j));
    probs.push_back(std::move(p));
  }
  kernels::active().certificates(n, m, c1.data(), c2.data(), theta.data(), u.data(), res.data());
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(res[i]));
  rec.add("certificate_equality", worst, 1e-9, static_cast<long>(n), "robust constraint at the certificate");

  long not_feasible = 0;
  for (const auto& p : probs) {
    const FilterDecision d = rtvcbf_socp(p);
    if (d.status == FilterStatus::kInfeasibleFallback || robust_constraint(p, d.u) < -1e-9 * std::max(1.0, std::abs(p.c1))) {
      ++not_feasible;
    }
  }
  rec.add("unbounded_always_feasible", static_cast<double>(not_feasible), 0.0, static_cast<long>(n));

  const long nb = 1000;
  double norm_err = 0.0;
  long wrong_at = 0, wrong_below = 0;
  for (long i = 0; i < nb; ++i) {
    FilterProblem p = s.certificate_problem(1 + static_cast<int>(i % 3), 0.95);
    const double threshold = -p.c1 / ((1.0 - p.theta) * p.c2.norm());
    p.u_max = threshold;
    const FilterDecision at = rtvcbf_socp(p);
    if (at.status == FilterStatus::kInfeasibleFallback) {
      ++wrong_at;
    } else {
      norm_err = std::max(norm_err, std::abs(at.u.norm() - threshold) / std::max(1.0, threshold));
    }
    p.u_max = threshold * (1.0 - 1e-6);
    if (rtvcbf_socp(p).status != FilterStatus::kInfeasibleFallback) ++wrong_below;
  }
  rec.add("boundary_feasible", static_cast<double>(wrong_at), 0.0, nb);
  rec.add("boundary_norm", norm_err, 1e-9, nb, "| |u| - u_max | / max(1, u_max)");
  rec.add("boundary_infeasible_below", static_cast<double>(wrong_below), 0.0, nb);
}

void invariance_suite(const ScenarioConfig& cfg, std::uint64_t seed, Recorder& rec) {
  // Each realization with the configured input bound, without it, and with a
  // smaller obstacle.
  std::vector<ScenarioConfig> variants(3, cfg);
  variants[1].filter.u_max.reset();
  variants[2].barrier.circle.radius = 1.0;
  std::vector<ScenarioConfig> runs;
  for (const auto& base : variants) {
    for (auto kind : {NonlinearityKind::kWorstCaseAdversary, NonlinearityKind::kNone,
                      NonlinearityKind::kConstantGain, NonlinearityKind::kTimeVaryingGain,
                      NonlinearityKind::kSaturationResidual}) {
      ScenarioConfig c = base;
      c.nonlinearity.params.kind = kind;
      runs.push_back(c);
    }
    for (std::uint64_t k = 0; k < 5; ++k) {
      ScenarioConfig c = base;
      c.nonlinearity.params.kind = NonlinearityKind::kRandomBounded;
      c.nonlinearity.params.seed = seed + k;
      runs.push_back(c);
    }
  }
  double worst = -std::numeric_limits<double>::infinity();
  long applicable = 0;
  for (const auto& c : runs) {
    const RunResult r = run_closed_loop(c, Architecture::kRtvcbf);
    if (!r.verdict.guarantee_applies) continue;
    ++applicable;
    const double h0 = r.trace.rows.front().h;
    worst = std::max(worst, -r.verdict.min_h / std::max(1.0, std::abs(h0)));
  }
  // A property that applied to no trace has not been checked.
  rec.add("forward_invariance", applicable ? worst : std::numeric_limits<double>::infinity(), 1e-6,
          applicable, "largest -min_h / max(1, |h0|) over traces where the guarantee applies");

  ScenarioConfig c = cfg;
  c.nonlinearity.params.kind = NonlinearityKind::kRandomBounded;
  const std::string a = format_trace(run_closed_loop(c, Architecture::kRtvcbf).trace);
  const std::string b = format_trace(run_closed_loop(c, Architecture::kRtvcbf).trace);
  rec.add("determinism", a == b ? 0.0 : 1.0, 0.0, 2, "byte comparison of two traces");

  ProblemSampler s(seed);
  double ratio = 0.0;
  long queries = 0;
  for (auto kind : {NonlinearityKind::kNone, NonlinearityKind::kWorstCaseAdversary,
                    NonlinearityKind::kConstantGain, NonlinearityKind::kTimeVaryingGain,
                    NonlinearityKind::kRandomBounded, NonlinearityKind::kSaturationResidual}) {
    NonlinearityParams np;
    np.kind = kind;
    np.gain = s.uniform(-1.0, 1.0);
    np.seed = seed;
    const double th = s.uniform(0.0, 0.99);
    const SectorNonlinearity phi(np, th);
    for (int i = 0; i < 100000; ++i) {
      const int m = 1 + i % 3;
      NonlinearityQuery q;
      q.t = s.uniform(0.0, 10.0);
      q.u = Vector(m);
      q.c2 = RowVector(m);
      for (int j = 0; j < m; ++j) {
        q.u(j) = s.normal() * 2.0;
        q.c2(j) = s.normal();
      }
      q.index = static_cast<std::uint64_t>(i);
      const Vector w = phi(q);
      const double un = q.u.norm();
      if (th * un > 0.0) ratio = std::max(ratio, w.norm() / (th * un));
      ++queries;
    }
  }
  rec.add("sector_compliance", ratio, 1.0 + 1e-12, queries, "max |w| / (theta |u|)");
}

}  // namespace

VerifyReport run_suite(Suite suite, const ScenarioConfig& config, std::uint64_t seed) {
  VerifyReport report;
  Recorder rec{report, std::string(suite_name(suite))};
  switch (suite) {
    case Suite::kDerivatives: derivatives_suite(config, seed, rec); break;
    case Suite::kSolver: solver_suite(seed, rec); break;
    case Suite::kCertificates: certificates_suite(seed, rec); break;
    case Suite::kInvariance: invariance_suite(config, seed, rec); break;
  }
  return report;
}

}  // namespace rtvcbf
