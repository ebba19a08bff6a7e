#include <gtest/gtest.h>

#include <random>

#include "rtvcbf/barrier.hpp"
#include "rtvcbf/errors.hpp"
#include "rtvcbf/plant.hpp"

using namespace rtvcbf;

namespace {

struct Fixture {
  LinearPlant plant = build_car_plant(CarParams{});
  MovingCircleBarrier bar{MovingCircleBarrier::Params{}, 6};
};

Vector scenario_x0() {
  Vector x(6);
  x << 1, 0, 0, 0, -40, 28;
  return x;
}

// Component-wise expressions written directly from h = de^2 + ds^2 - (kr)^2.
struct Closed {
  double h, lf, lf2, c2;
};
Closed closed_form(const LinearPlant& P, const Vector& x, double t, double ve, double vs, double kr) {
  const Vector Ax = P.A() * x;
  const Vector A2x = P.A() * Ax;
  const Vector AB = P.A() * P.B().col(0);
  const double de = x(0) - ve * t, ds = x(4) - vs * t;
  const double pe = Ax(0) - ve, ps = Ax(4) - vs;
  Closed c;
  c.h = de * de + ds * ds - kr * kr;
  c.lf = 2 * de * pe + 2 * ds * ps;
  c.lf2 = 2 * pe * pe + 2 * de * A2x(0) + 2 * ps * ps + 2 * ds * A2x(4);
  c.c2 = 2 * pe * P.B()(0, 0) + 2 * de * AB(0) + 2 * ps * P.B()(4, 0) + 2 * ds * AB(4);
  return c;
}

// x(tau) under x' = A x + B v, by RK4 with many small steps.
Vector flow(const LinearPlant& P, Vector x, double v, double tau) {
  const int steps = 200;
  const double dt = tau / steps;
  const Vector u = Vector::Constant(1, v);
  const Vector z = Vector::Zero(1);
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = P.dynamics(x, u, z);
    const Vector k2 = P.dynamics(x + 0.5 * dt * k1, u, z);
    const Vector k3 = P.dynamics(x + 0.5 * dt * k2, u, z);
    const Vector k4 = P.dynamics(x + dt * k3, u, z);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

Vector box_sample(std::mt19937_64& g) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vector x(6);
  x << 3 * U(g), 3 * U(g), 0.3 * U(g), 1.0 * U(g), 40 * U(g), 28 + 2 * U(g);
  return x;
}

}  // namespace

TEST(Barrier, InitialValue) {
  Fixture f;
  const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, scenario_x0(), 0.0, 8.6);
  EXPECT_DOUBLE_EQ(ev.h, 1592.0);
  EXPECT_DOUBLE_EQ(f.bar.value(scenario_x0(), 0.0), 1.0 + 1600.0 - 9.0);
}

TEST(Barrier, MatchesClosedFormComponents) {
  Fixture f;
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> T(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const Vector x = box_sample(g);
    const double t = T(g);
    const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, x, t, 8.6);
    const Closed c = closed_form(f.plant, x, t, 1.0, -10.0, 3.0);
    auto tol = [](double a) { return 1e-12 * std::max(1.0, std::abs(a)); };
    EXPECT_NEAR(ev.h, c.h, tol(c.h));
    EXPECT_NEAR(ev.lf_h, c.lf, tol(c.lf));
    EXPECT_NEAR(ev.lf2_h, c.lf2, 10 * tol(c.lf2));
    EXPECT_NEAR(ev.c2(0), c.c2, 10 * tol(c.c2));
  }
}

TEST(Barrier, DerivativesAlongTrajectories) {
  // With a constant input v: dh/dt = Lf_h and d2h/dt2 = Lf2_h + c2 v.
  Fixture f;
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> T(0.0, 3.0), V(-0.7, 0.7);
  const double d = 1e-3, d1 = 1e-4;
  double worst1 = 0.0, worst2 = 0.0, worst_c2 = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vector x = box_sample(g);
    const double t = T(g);
    const double v = V(g);
    const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, x, t, 8.6);
    auto h_at = [&](double vv, double tau) { return f.bar.value(flow(f.plant, x, vv, tau), t + tau); };
    const double hp = h_at(v, d), hm = h_at(v, -d), h0 = ev.h;
    const double dh = (h_at(v, d1) - h_at(v, -d1)) / (2 * d1);
    const double ddh = (hp - 2 * h0 + hm) / (d * d);
    const double scale1 = std::max({1.0, std::abs(ev.lf_h), std::abs(dh)});
    const double pred2 = ev.lf2_h + ev.c2(0) * v;
    const double scale2 = std::max({1.0, std::abs(ev.lf2_h), std::abs(ev.c2(0) * v)});
    worst1 = std::max(worst1, std::abs(dh - ev.lf_h) / scale1);
    worst2 = std::max(worst2, std::abs(ddh - pred2) / scale2);
    // c2 from two inputs: difference of second derivatives.
    const double hp1 = h_at(1.0, d), hm1 = h_at(1.0, -d), hp0 = h_at(0.0, d), hm0 = h_at(0.0, -d);
    const double c2_fd = ((hp1 - 2 * h0 + hm1) - (hp0 - 2 * h0 + hm0)) / (d * d);
    worst_c2 = std::max(worst_c2, std::abs(c2_fd - ev.c2(0)) / std::max({1.0, std::abs(ev.c2(0)), std::abs(ev.lf2_h)}));
  }
  EXPECT_LE(worst1, 1e-5);
  EXPECT_LE(worst2, 1e-5);
  EXPECT_LE(worst_c2, 1e-5);
}

TEST(Barrier, StationaryObstacleAndStateGiveZeroDerivatives) {
  Matrix A = Matrix::Zero(6, 6);
  Matrix B = Matrix::Zero(6, 1);
  B(1, 0) = 1.0;
  const LinearPlant plant(A, B);
  MovingCircleBarrier::Params p;
  p.lateral_velocity = 0.0;
  p.longitudinal_velocity = 0.0;
  const MovingCircleBarrier bar(p, 6);
  Vector x(6);
  x << 2, 0, 0, 0, 7, 0;
  const BarrierEvaluation ev = eval_barrier(bar, plant, x, 1.3, 2.0);
  EXPECT_EQ(ev.lf_h, 0.0);
  EXPECT_EQ(ev.lf2_h, 0.0);
}

TEST(Barrier, C1IdentityIsExact) {
  Fixture f;
  std::mt19937_64 g(8);
  for (int i = 0; i < 1000; ++i) {
    const double alpha = 0.1 + 20.0 * std::uniform_real_distribution<double>(0, 1)(g);
    const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, box_sample(g), 0.7, alpha);
    EXPECT_EQ(ev.c1, ev.lf2_h + 2.0 * ev.alpha * ev.lf_h + ev.alpha * ev.alpha * ev.h);
  }
}

TEST(Barrier, FirstLieDerivativeNeverSeesInput) {
  Fixture f;
  std::mt19937_64 g(9);
  for (int i = 0; i < 1000; ++i) {
    const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, box_sample(g), 1.1, 8.6);
    EXPECT_EQ(ev.lg_h(0), 0.0);
  }
}

TEST(Barrier, CoMovesWithObstacle) {
  Fixture f;
  std::mt19937_64 g(10);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    Vector x = box_sample(g);
    const double t = 1.0 + U(g) * 0.5, delta = U(g);
    Vector y = x;
    y(0) += 1.0 * delta;
    y(4) += -10.0 * delta;
    const double a = f.bar.value(x, t), b = f.bar.value(y, t + delta);
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(Barrier, RejectsInvalidParameters) {
  MovingCircleBarrier::Params p;
  p.radius = 0.0;
  EXPECT_THROW(MovingCircleBarrier(p, 6), ConfigError);
  p = {};
  p.clearance_multiplier = 0.9;
  EXPECT_THROW(MovingCircleBarrier(p, 6), ConfigError);
  p = {};
  p.longitudinal_index = p.lateral_index;
  EXPECT_THROW(MovingCircleBarrier(p, 6), ConfigError);
  p = {};
  p.longitudinal_index = 6;
  EXPECT_THROW(MovingCircleBarrier(p, 6), ConfigError);
  Fixture f;
  EXPECT_THROW(eval_barrier(f.bar, f.plant, scenario_x0(), 0.0, 0.0), ContractError);
}

TEST(Barrier, CallbackBarrierUsesSamePipeline) {
  Fixture f;
  const CallbackBarrier cb([&](const Vector& x, double t) { return f.bar.jet(x, t); });
  const Vector x = scenario_x0();
  const BarrierEvaluation a = eval_barrier(f.bar, f.plant, x, 0.4, 8.6);
  const BarrierEvaluation b = eval_barrier(cb, f.plant, x, 0.4, 8.6);
  EXPECT_EQ(a.c1, b.c1);
  EXPECT_EQ(a.c2, b.c2);
}

TEST(FdCheck, QuadraticGradientIsExact) {
  Fixture f;
  std::mt19937_64 g(12);
  for (int i = 0; i < 50; ++i) {
    const FdReport r = fd_check(f.bar, f.plant, box_sample(g), 0.9, 8.6, 1e-4);
    EXPECT_TRUE(r.finite_input);
    EXPECT_LE(r.grad_x, 1e-9);
  }
}

TEST(FdCheck, OperatingBoxResiduals) {
  Fixture f;
  std::mt19937_64 g(13);
  std::uniform_real_distribution<double> T(0.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    worst = std::max(worst, fd_check(f.bar, f.plant, box_sample(g), T(g), 8.6, 1e-4).max());
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(FdCheck, TimeDerivativeIsSecondOrder) {
  // Cubic-in-time barrier so that the central difference has a visible
  // truncation error that shrinks by four when the step halves.
  const LinearPlant plant(Matrix::Zero(1, 1), Matrix::Identity(1, 1));
  const CallbackBarrier cubic([](const Vector& x, double t) {
    BarrierJet j;
    j.value = x(0) + t * t * t;
    j.grad = Vector::Ones(1);
    j.dt = 3 * t * t;
    j.hess = Matrix::Zero(1, 1);
    j.grad_dt = Vector::Zero(1);
    j.dtt = 6 * t;
    return j;
  });
  const Vector x = Vector::Constant(1, 0.5);
  const double r1 = fd_check(cubic, plant, x, 0.2, 1.0, 1e-2).dh_dt;
  const double r2 = fd_check(cubic, plant, x, 0.2, 1.0, 5e-3).dh_dt;
  ASSERT_GT(r1, 0.0);
  EXPECT_NEAR(r1 / r2, 4.0, 0.05);
}

TEST(FdCheck, FlagsNonFiniteInput) {
  Fixture f;
  Vector x = scenario_x0();
  x(2) = std::nan("");
  const FdReport r = fd_check(f.bar, f.plant, x, 0.0, 8.6, 1e-4);
  EXPECT_FALSE(r.finite_input);
  EXPECT_TRUE(std::isnan(r.max()));
  EXPECT_THROW(fd_check(f.bar, f.plant, scenario_x0(), 0.0, 8.6, 0.0), ContractError);
}

TEST(RelativeDegree, LostWhenLateralOffsetAndVelocitiesVanish) {
  // c2 = 2 (A x)_e B_e + 2 de (AB)_e + ...; with de = 0 and a state at rest
  // relative to the obstacle, every term feeding c2 is zero.
  const CarParams cp;
  const LinearPlant plant = build_car_plant(cp);
  MovingCircleBarrier::Params p;
  p.lateral_velocity = 0.0;
  const MovingCircleBarrier bar(p, 6);
  Vector x = Vector::Zero(6);
  x(4) = -20.0;
  x(5) = -10.0;
  const BarrierEvaluation ev = eval_barrier(bar, plant, x, 0.0, 8.6);
  EXPECT_FALSE(relative_degree_ok(ev, relative_degree_eps(ev, 1e-9)).ok);
}

TEST(RelativeDegree, MarginAndThreshold) {
  BarrierEvaluation ev;
  ev.c2 = RowVector::Constant(1, 4.0);
  const auto r = relative_degree_ok(ev, 1e-9);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.margin, 4.0, 1e-8);
  EXPECT_FALSE(relative_degree_ok(ev, 4.0).ok);
  EXPECT_EQ(relative_degree_ok(ev, 4.0).margin, 0.0);
  EXPECT_TRUE(relative_degree_ok(ev, std::nextafter(4.0, 0.0)).ok);
  EXPECT_LT(relative_degree_ok(ev, std::nextafter(4.0, 5.0)).margin, 0.0);
  EXPECT_THROW(relative_degree_ok(ev, 0.0), ContractError);
}

TEST(InitialConditions, ScenarioStart) {
  Fixture f;
  const BarrierEvaluation ev = eval_barrier(f.bar, f.plant, scenario_x0(), 0.0, 8.6);
  const InitialMembership m = initial_conditions_ok(ev);
  EXPECT_TRUE(m.in_safe_set);
  EXPECT_TRUE(m.in_c1_set);
  EXPECT_DOUBLE_EQ(ev.h, 1592.0);
}

TEST(InitialConditions, BoundaryAndConstructedViolation) {
  BarrierEvaluation ev;
  ev.alpha = 2.0;
  ev.h = 0.0;
  ev.lf_h = 0.0;
  EXPECT_TRUE(initial_conditions_ok(ev).both());
  ev.h = 3.0;
  ev.lf_h = -ev.alpha * ev.h - 1.0;
  const InitialMembership m = initial_conditions_ok(ev);
  EXPECT_TRUE(m.in_safe_set);
  EXPECT_FALSE(m.in_c1_set);
}
