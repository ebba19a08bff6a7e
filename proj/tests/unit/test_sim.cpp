#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rtvcbf/errors.hpp"
#include "rtvcbf/nonlinearity.hpp"
#include "rtvcbf/sim.hpp"
#include "rtvcbf/trace.hpp"

using namespace rtvcbf;

namespace {

constexpr NonlinearityKind kKinds[] = {
    NonlinearityKind::kNone,          NonlinearityKind::kWorstCaseAdversary,
    NonlinearityKind::kConstantGain,  NonlinearityKind::kTimeVaryingGain,
    NonlinearityKind::kRandomBounded, NonlinearityKind::kSaturationResidual,
};

ScenarioConfig car() { return ScenarioConfig{}; }

Vector random_vector(std::mt19937_64& g, int m, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(m);
  for (int i = 0; i < m; ++i) v(i) = nd(g);
  return v;
}

SimulationTrace synthetic_trace(const std::vector<double>& h, double dt) {
  SimulationTrace tr;
  tr.meta.architecture = "rtvcbf";
  tr.meta.dt_ctrl = dt;
  tr.meta.theta_filter = 0.5;
  tr.meta.theta_nonlinearity = 0.5;
  for (std::size_t i = 0; i < h.size(); ++i) {
    StepRecord r;
    r.t = static_cast<double>(i) * dt;
    r.h = h[i];
    r.lf_h = 0.0;
    r.u = Vector::Constant(1, 1.0);
    r.w = Vector::Constant(1, -0.5);
    r.status = FilterStatus::kConstraintActive;
    tr.rows.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(Nonlinearity, EveryKindStaysInTheSector) {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (NonlinearityKind kind : kKinds) {
    NonlinearityParams p;
    p.kind = kind;
    p.gain = 1.0;
    p.frequency = 3.3;
    p.phase = 0.4;
    p.level = 0.2;
    p.seed = 99;
    const double theta = 0.7;
    const SectorNonlinearity phi(p, theta);
    for (std::uint64_t i = 0; i < 100000; ++i) {
      const int m = 1 + static_cast<int>(i % 3);
      NonlinearityQuery q;
      q.t = 10.0 * U(g);
      q.u = random_vector(g, m, std::pow(10.0, 4.0 * U(g) - 2.0));
      q.c2 = random_vector(g, m, 3.0).transpose();
      q.index = i;
      const Vector w = phi(q);
      ASSERT_EQ(w.size(), m);
      ASSERT_LE(w.norm(), theta * q.u.norm() + SectorNonlinearity::kSectorSlack)
          << nonlinearity_name(kind) << " query " << i;
    }
  }
}

TEST(Nonlinearity, AdversaryIsTheWorstCase) {
  std::mt19937_64 g(22);
  for (double theta : {0.0, 0.3, 0.9}) {
    const SectorNonlinearity phi({NonlinearityKind::kWorstCaseAdversary}, theta);
    for (int trial = 0; trial < 1000; ++trial) {
      const int m = 1 + trial % 4;
      NonlinearityQuery q;
      q.u = random_vector(g, m, 2.0);
      q.c2 = random_vector(g, m, 2.0).transpose();
      const Vector w = phi(q);
      EXPECT_LE((w - worst_case_w(q.u, q.c2, theta)).norm(), 1e-14 * (1.0 + w.norm()));
      // The barrier condition loses exactly theta |c2| |u|.
      EXPECT_NEAR(q.c2 * w, -theta * q.c2.norm() * q.u.norm(), 1e-12 * (1.0 + q.c2.norm() * q.u.norm()));
    }
  }
}

TEST(Nonlinearity, AdversaryWithoutDirectionIsZero) {
  const SectorNonlinearity phi({NonlinearityKind::kWorstCaseAdversary}, 0.5);
  NonlinearityQuery q;
  q.u = Vector::Constant(2, 1.0);
  EXPECT_TRUE(phi(q).isZero(0.0));
  q.c2 = RowVector::Zero(2);
  EXPECT_TRUE(phi(q).isZero(0.0));
}

TEST(Nonlinearity, ClosedFormKinds) {
  NonlinearityQuery q;
  q.t = 0.125;
  q.u = Vector::Constant(1, 0.5);

  NonlinearityParams p;
  p.kind = NonlinearityKind::kNone;
  EXPECT_EQ(SectorNonlinearity(p, 0.5)(q)(0), 0.0);

  p.kind = NonlinearityKind::kConstantGain;
  p.gain = -0.5;
  EXPECT_DOUBLE_EQ(SectorNonlinearity(p, 0.4)(q)(0), -0.1);

  p.kind = NonlinearityKind::kTimeVaryingGain;
  p.frequency = 2.0;
  p.phase = 0.0;
  // sin(2 pi * 2 * 0.125) = sin(pi / 2) = 1
  EXPECT_NEAR(SectorNonlinearity(p, 0.4)(q)(0), 0.2, 1e-15);

  p.kind = NonlinearityKind::kSaturationResidual;
  p.level = 0.35;
  const Vector w = SectorNonlinearity(p, 0.5)(q);
  EXPECT_NEAR((q.u + w).norm(), 0.35, 1e-15);
  q.u(0) = 0.3;
  EXPECT_EQ(SectorNonlinearity(p, 0.5)(q)(0), 0.0);
  // Far past the level the residual is capped at theta |u|.
  q.u(0) = 10.0;
  EXPECT_NEAR(SectorNonlinearity(p, 0.5)(q)(0), -5.0, 1e-12);
}

TEST(Nonlinearity, RandomBoundedIsReproducible) {
  NonlinearityParams p;
  p.kind = NonlinearityKind::kRandomBounded;
  p.seed = 7;
  const SectorNonlinearity a(p, 0.5), b(p, 0.5);
  p.seed = 8;
  const SectorNonlinearity c(p, 0.5);
  NonlinearityQuery q;
  q.u = Vector::Constant(3, 1.0);
  int differ = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    q.index = i;
    EXPECT_EQ(a(q), b(q));
    if (a(q) != c(q)) ++differ;
  }
  EXPECT_GT(differ, 90);
}

TEST(Nonlinearity, RejectsBadParameters) {
  EXPECT_THROW(SectorNonlinearity({NonlinearityKind::kNone}, 1.0), ConfigError);
  EXPECT_THROW(SectorNonlinearity({NonlinearityKind::kNone}, -0.1), ConfigError);
  NonlinearityParams p;
  p.kind = NonlinearityKind::kConstantGain;
  p.gain = 1.5;
  EXPECT_THROW(SectorNonlinearity(p, 0.5), ConfigError);
  p.kind = NonlinearityKind::kSaturationResidual;
  p.level = 0.0;
  EXPECT_THROW(SectorNonlinearity(p, 0.5), ConfigError);
  EXPECT_EQ(parse_nonlinearity("worst-case-adversary"), NonlinearityKind::kWorstCaseAdversary);
  EXPECT_FALSE(parse_nonlinearity("adversary").has_value());
}

TEST(Rk4, ZeroDynamicsLeaveStateUnchanged) {
  const LinearPlant plant(Matrix::Zero(3, 3), Matrix::Zero(3, 1));
  Vector x(3);
  x << 1.0, -2.0, 3.5;
  EXPECT_EQ(rk4_step(plant, x, Vector::Constant(1, 4.0), Vector::Zero(1), 0.1), x);
}

TEST(Rk4, ExponentialDecay) {
  const LinearPlant plant(Matrix::Constant(1, 1, -1.0), Matrix::Zero(1, 1));
  const Vector x = rk4_step(plant, Vector::Constant(1, 1.0), Vector::Zero(1), Vector::Zero(1), 0.1);
  EXPECT_NEAR(x(0), std::exp(-0.1), 1e-7);
  // Fourth order: the one-step error is dt^5 / 120 plus higher terms.
  EXPECT_NEAR(x(0) - std::exp(-0.1), 0.1 * 0.1 * 0.1 * 0.1 * 0.1 / 120.0, 2e-9);
}

TEST(Rk4, HarmonicOscillatorPeriod) {
  Matrix A(2, 2);
  A << 0.0, 1.0, -1.0, 0.0;
  const LinearPlant plant(A, Matrix::Zero(2, 1));
  const long n = 6283;
  const double dt = 2.0 * kPi / static_cast<double>(n);
  Vector x(2);
  x << 1.0, 0.0;
  for (long k = 0; k < n; ++k) x = rk4_step(plant, x, Vector::Zero(1), Vector::Zero(1), dt, k);
  EXPECT_LE(std::abs(x(0) - 1.0), 1e-8);
  EXPECT_LE(std::abs(x(1)), 1e-8);
}

TEST(Rk4, InputActsThroughB) {
  const LinearPlant plant(Matrix::Zero(2, 2), (Matrix(2, 1) << 1.0, 2.0).finished());
  const Vector x = rk4_step(plant, Vector::Zero(2), Vector::Constant(1, 3.0), Vector::Constant(1, -1.0), 0.5);
  EXPECT_DOUBLE_EQ(x(0), 1.0);
  EXPECT_DOUBLE_EQ(x(1), 2.0);
}

TEST(Rk4, Errors) {
  const LinearPlant plant(Matrix::Constant(1, 1, 1e308), Matrix::Zero(1, 1));
  EXPECT_THROW(rk4_step(plant, Vector::Constant(1, 1.0), Vector::Zero(1), Vector::Zero(1), 0.0), ContractError);
  try {
    rk4_step(plant, Vector::Constant(1, 1e10), Vector::Zero(1), Vector::Zero(1), 1.0, 42);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.step(), 42);
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
}

TEST(ClosedLoop, CarScenarioOutcomes) {
  const ScenarioConfig cfg = car();
  const double limit = deg_to_rad(40.0);
  const RunResult lqr = run_closed_loop(cfg, Architecture::kBaselineOnly);
  const RunResult tv = run_closed_loop(cfg, Architecture::kTvcbf);
  const RunResult rtv = run_closed_loop(cfg, Architecture::kRtvcbf);
  EXPECT_LT(lqr.verdict.min_h, 0.0);
  EXPECT_LT(tv.verdict.min_h, 0.0);
  ASSERT_TRUE(tv.verdict.first_violation.has_value());
  EXPECT_GE(*tv.verdict.first_violation, 0.5);
  EXPECT_LE(*tv.verdict.first_violation, 1.5);
  EXPECT_GE(rtv.verdict.min_h, -1e-6);
  EXPECT_TRUE(rtv.verdict.completed);
  for (const RunResult* r : {&tv, &rtv}) {
    EXPECT_GE(r->verdict.max_abs_u, limit * (1.0 - 1e-9));
    EXPECT_LE(r->verdict.max_abs_u, limit * (1.0 + 1e-12));
    EXPECT_GT(r->verdict.saturated_count, 0);
  }
  EXPECT_TRUE(rtv.verdict.initial.both());
  EXPECT_TRUE(rtv.verdict.sector_ok);
}

TEST(ClosedLoop, RecordLayout) {
  ScenarioConfig cfg = car();
  cfg.sim.horizon = 0.25;
  cfg.sim.dt_ctrl = 0.01;
  cfg.sim.dt_sim = 0.0025;
  const RunResult r = run_closed_loop(cfg, Architecture::kRtvcbf);
  ASSERT_EQ(r.trace.rows.size(), 26u);
  for (std::size_t i = 1; i < r.trace.rows.size(); ++i) {
    EXPECT_GT(r.trace.rows[i].t, r.trace.rows[i - 1].t);
  }
  EXPECT_EQ(r.trace.rows.front().x, cfg.sim.x0);
  EXPECT_EQ(r.trace.meta.n, 6);
  EXPECT_EQ(r.trace.meta.m, 1);
  EXPECT_EQ(r.trace.meta.architecture, "rtvcbf");
  EXPECT_EQ(r.trace.meta.config_hash, scenario_hash(cfg));
}

TEST(ClosedLoop, ZeroHorizonGivesOneRecord) {
  ScenarioConfig cfg = car();
  cfg.sim.horizon = 0.0;
  for (Architecture a : {Architecture::kBaselineOnly, Architecture::kTvcbf, Architecture::kRtvcbf}) {
    const RunResult r = run_closed_loop(cfg, a);
    ASSERT_EQ(r.trace.rows.size(), 1u);
    EXPECT_EQ(r.trace.rows[0].t, 0.0);
    EXPECT_EQ(r.trace.rows[0].h, 1592.0);
  }
}

TEST(ClosedLoop, RobustFilterAtThetaZeroEqualsNominal) {
  ScenarioConfig cfg = car();
  cfg.filter.theta = 0.0;
  cfg.nonlinearity.params.kind = NonlinearityKind::kNone;
  const RunResult tv = run_closed_loop(cfg, Architecture::kTvcbf);
  const RunResult rtv = run_closed_loop(cfg, Architecture::kRtvcbf);
  ASSERT_EQ(tv.trace.rows.size(), rtv.trace.rows.size());
  for (std::size_t i = 0; i < tv.trace.rows.size(); ++i) {
    EXPECT_EQ(tv.trace.rows[i].u, rtv.trace.rows[i].u) << i;
    EXPECT_EQ(tv.trace.rows[i].x, rtv.trace.rows[i].x) << i;
  }
}

TEST(ClosedLoop, HalvingTheIntegratorStepBarelyMovesMinH) {
  for (Architecture a : {Architecture::kBaselineOnly, Architecture::kTvcbf, Architecture::kRtvcbf}) {
    ScenarioConfig coarse = car();
    coarse.sim.dt_ctrl = 0.002;
    coarse.sim.dt_sim = 0.002;
    ScenarioConfig fine = coarse;
    fine.sim.dt_sim = 0.001;
    const double h1 = run_closed_loop(coarse, a).verdict.min_h;
    const double h2 = run_closed_loop(fine, a).verdict.min_h;
    EXPECT_LE(std::abs(h1 - h2), 1e-4 * (1.0 + std::abs(h2))) << architecture_name(a);
  }
}

TEST(ClosedLoop, RunsAreDeterministic) {
  ScenarioConfig cfg = car();
  cfg.nonlinearity.params.kind = NonlinearityKind::kRandomBounded;
  cfg.nonlinearity.params.seed = 5;
  const std::string a = format_trace(run_closed_loop(cfg, Architecture::kRtvcbf).trace);
  const std::string b = format_trace(run_closed_loop(cfg, Architecture::kRtvcbf).trace);
  EXPECT_EQ(a, b);
}

TEST(ClosedLoop, SolverFailureKeepsPartialTrace) {
  ScenarioConfig cfg = car();
  cfg.filter.solver.max_iterations = 1;
  cfg.filter.solver.root_tol = 1e-300;
  const RunResult r = run_closed_loop(cfg, Architecture::kRtvcbf);
  ASSERT_TRUE(r.trace.terminal.has_value());
  EXPECT_EQ(r.trace.terminal->kind, "solver-error");
  EXPECT_GT(r.trace.rows.size(), 0u);
  EXPECT_EQ(static_cast<long>(r.trace.rows.size()), r.trace.terminal->step);
  EXPECT_FALSE(r.verdict.completed);
  EXPECT_FALSE(r.verdict.guarantee_applies);
}

TEST(ClosedLoop, BaselineIgnoresTheFilter) {
  const ScenarioConfig cfg = car();
  const RunResult r = run_closed_loop(cfg, Architecture::kBaselineOnly);
  for (const auto& row : r.trace.rows) {
    EXPECT_EQ(row.u, row.u0);
    EXPECT_EQ(row.status, FilterStatus::kBaselinePassthrough);
  }
  EXPECT_FALSE(r.verdict.all_feasible);
  EXPECT_FALSE(r.verdict.guarantee_applies);
}

TEST(ClosedLoop, UnboundedRobustRunIsGuaranteed) {
  ScenarioConfig cfg = car();
  cfg.filter.u_max.reset();
  const RunResult r = run_closed_loop(cfg, Architecture::kRtvcbf);
  EXPECT_TRUE(r.verdict.all_feasible);
  EXPECT_TRUE(r.verdict.guarantee_applies);
  EXPECT_GE(r.verdict.min_h, -r.verdict.tolerance);
  EXPECT_TRUE(std::isinf(r.trace.rows[10].feas_margin));
}

TEST(Monitor, ConstantBarrier) {
  const SimulationTrace tr = synthetic_trace(std::vector<double>(5, 2.0), 0.1);
  const MonitorVerdict v = safety_monitor(tr, 1.0, 1e-6);
  EXPECT_EQ(v.min_h, 2.0);
  EXPECT_FALSE(v.first_violation.has_value());
  EXPECT_TRUE(std::isnan(v.exp_residual.front()));
  EXPECT_TRUE(std::isnan(v.exp_residual.back()));
  for (std::size_t i = 1; i + 1 < 5; ++i) EXPECT_NEAR(v.exp_residual[i], 2.0, 1e-12);
  EXPECT_TRUE(v.guarantee_applies);
  EXPECT_NEAR(v.control_energy, 0.5, 1e-15);
}

TEST(Monitor, ViolationAndTolerance) {
  SimulationTrace tr = synthetic_trace({4.0, 1.0, -3e-6, -5e-6, -1.0}, 0.5);
  const MonitorVerdict v = safety_monitor(tr, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(v.tolerance, 4e-6);
  ASSERT_TRUE(v.first_violation.has_value());
  EXPECT_EQ(*v.first_violation, 1.5);
  EXPECT_EQ(v.min_h, -1.0);
  EXPECT_EQ(v.min_h_time, 2.0);
}

TEST(Monitor, SectorFlag) {
  SimulationTrace tr = synthetic_trace({1.0, 1.0, 1.0}, 0.1);
  tr.rows[1].w(0) = -0.6;
  const MonitorVerdict v = safety_monitor(tr, 1.0, 1e-6);
  EXPECT_FALSE(v.sector_ok);
  EXPECT_EQ(v.sector_violations, 1);
  EXPECT_FALSE(v.guarantee_applies);
}

TEST(Monitor, GuaranteeNeedsFilterThetaToCoverTheSector) {
  SimulationTrace tr = synthetic_trace({1.0, 1.0, 1.0}, 0.1);
  tr.meta.theta_filter = 0.4;
  EXPECT_FALSE(safety_monitor(tr, 1.0, 1e-6).guarantee_applies);
}

TEST(Monitor, FallbackAndInitialConditions) {
  SimulationTrace tr = synthetic_trace({1.0, 1.0, 1.0}, 0.1);
  tr.rows[2].status = FilterStatus::kInfeasibleFallback;
  MonitorVerdict v = safety_monitor(tr, 1.0, 1e-6);
  EXPECT_EQ(v.fallback_count, 1);
  EXPECT_FALSE(v.all_feasible);
  EXPECT_FALSE(v.guarantee_applies);

  tr = synthetic_trace({1.0, 1.0, 1.0}, 0.1);
  tr.rows[0].lf_h = -2.0;
  v = safety_monitor(tr, 1.0, 1e-6);
  EXPECT_TRUE(v.initial.in_safe_set);
  EXPECT_FALSE(v.initial.in_c1_set);
  EXPECT_FALSE(v.guarantee_applies);

  EXPECT_THROW(safety_monitor(SimulationTrace{}, 1.0, 1e-6), ContractError);
}

TEST(Architecture, Names) {
  EXPECT_EQ(parse_architecture("lqr"), Architecture::kBaselineOnly);
  EXPECT_EQ(parse_architecture("rtvcbf"), Architecture::kRtvcbf);
  EXPECT_FALSE(parse_architecture("mpc").has_value());
  EXPECT_EQ(architecture_name(Architecture::kTvcbf), "tvcbf");
}
