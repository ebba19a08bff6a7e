#include "rtvcbf/sim.hpp"

#include <cmath>
#include <sstream>

#include "rtvcbf/errors.hpp"
#include "rtvcbf/nonlinearity.hpp"

namespace rtvcbf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kBaselineOnly: return "baseline-only";
    case Architecture::kTvcbf: return "tvcbf";
    case Architecture::kRtvcbf: return "rtvcbf";
  }
  return "unknown";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "baseline-only" || name == "baseline" || name == "lqr") return Architecture::kBaselineOnly;
  if (name == "tvcbf") return Architecture::kTvcbf;
  if (name == "rtvcbf") return Architecture::kRtvcbf;
  return std::nullopt;
}

Vector rk4_step(const LinearPlant& plant, const Vector& x, const Vector& u, const Vector& w,
                double dt, long step) {
  if (!(dt > 0.0)) throw ContractError("rk4_step: dt must be > 0");
  const Vector k1 = plant.dynamics(x, u, w);
  const Vector k2 = plant.dynamics(x + (0.5 * dt) * k1, u, w);
  const Vector k3 = plant.dynamics(x + (0.5 * dt) * k2, u, w);
  const Vector k4 = plant.dynamics(x + dt * k3, u, w);
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    std::ostringstream os;
    os << "rk4_step: non-finite state";
    if (step >= 0) os << " at step " << step;
    throw IntegrationError(os.str(), step);
  }
  return next;
}

RunResult run_closed_loop(const ScenarioConfig& config, Architecture arch) {
  config.validate();
  const LinearPlant plant = config.build_plant();
  const MovingCircleBarrier barrier(config.barrier.circle, plant.n());
  const BaselineController baseline(config.baseline.K, config.baseline.reference,
                                    config.baseline.lat_indices);
  const SectorNonlinearity phi(config.nonlinearity.params, config.nonlinearity_theta());

  const double alpha = config.barrier.alpha;
  const double dt_ctrl = config.sim.dt_ctrl;
  const double dt_sim = config.sim.dt_sim;
  const long steps = std::lround(config.sim.horizon / dt_ctrl);
  const long substeps = std::lround(dt_ctrl / dt_sim);
  const std::optional<double> u_max = config.filter.u_max;

  RunResult result;
  SimulationTrace& tr = result.trace;
  tr.labels = plant.labels();
  TraceMeta& meta = tr.meta;
  meta.scenario = config.name;
  meta.config_hash = scenario_hash(config);
  meta.architecture = std::string(architecture_name(arch));
  meta.nonlinearity = std::string(nonlinearity_name(phi.kind()));
  meta.alpha = alpha;
  meta.theta_filter = arch == Architecture::kRtvcbf ? config.filter.theta : 0.0;
  meta.theta_nonlinearity = phi.theta();
  meta.dt_ctrl = dt_ctrl;
  meta.dt_sim = dt_sim;
  meta.horizon = config.sim.horizon;
  meta.u_max = u_max;
  meta.seed = config.nonlinearity.params.seed;
  meta.n = plant.n();
  meta.m = plant.m();
  tr.rows.reserve(static_cast<std::size_t>(steps + 1));

  Vector x = config.sim.x0;
  Vector u_last;
  FilterStatus status_last = FilterStatus::kBaselinePassthrough;

  auto fail = [&](long k, double t, const char* kind, const std::exception& e) {
    TraceEvent ev{k, t, kind, e.what()};
    tr.events.push_back(ev);
    tr.terminal = ev;
  };

  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt_ctrl;
    StepRecord rec;
    rec.t = t;
    rec.x = x;
    try {
      const BarrierEvaluation ev = eval_barrier(barrier, plant, x, t, alpha);
      rec.h = ev.h;
      rec.lf_h = ev.lf_h;
      rec.c1 = ev.c1;
      rec.c2 = ev.c2;
      rec.u0 = baseline.control(x);
      const double c2n = ev.c2.norm();
      const double theta_f = meta.theta_filter;
      rec.feas_margin = (u_max && c2n > 0.0) ? feasibility_margin(ev.c1, ev.c2, theta_f, *u_max).margin
                                             : (u_max ? kNaN : kInf);

      if (arch == Architecture::kBaselineOnly) {
        rec.u = rec.u0;
        if (config.baseline.saturate && u_max && rec.u.norm() > *u_max) {
          rec.u *= *u_max / rec.u.norm();
        }
        rec.status = FilterStatus::kBaselinePassthrough;
      } else if (!relative_degree_ok(ev, relative_degree_eps(ev, config.barrier.relative_degree_coeff)).ok) {
        rec.degenerate = true;
        rec.u = u_last.size() > 0 ? u_last : rec.u0;
        rec.status = status_last;
        rec.kkt = kNaN;
        std::ostringstream os;
        os.precision(17);
        os << "|c2| = " << c2n << " below tolerance; holding previous control";
        tr.events.push_back({k, t, "degeneracy", os.str()});
      } else {
        FilterProblem p{rec.u0, ev.c1, ev.c2, theta_f, u_max};
        FilterDecision d;
        bool clipped = false;
        if (arch == Architecture::kTvcbf) {
          if (config.filter.tvcbf_saturation == SaturationMode::kPostSaturate) {
            p.u_max.reset();
            d = tvcbf_qp(p, config.filter.solver);
            if (u_max && d.u.norm() > *u_max) {
              d.u *= *u_max / d.u.norm();
              clipped = true;
            }
          } else {
            d = tvcbf_qp(p, config.filter.solver);
          }
        } else {
          d = rtvcbf_socp(p, config.filter.solver);
        }
        rec.u = d.u;
        rec.status = d.status;
        rec.kkt = d.status == FilterStatus::kInfeasibleFallback ? kNaN : d.kkt.max();
        if (d.status == FilterStatus::kInfeasibleFallback) {
          std::ostringstream os;
          os.precision(17);
          os << "input bound cannot satisfy the barrier condition (margin " << d.feasibility_margin
             << "); maximum effort along c2";
          tr.events.push_back({k, t, "fallback", os.str()});
        }
        if (clipped) {
          tr.events.push_back({k, t, "post-saturation", "filtered control clipped to u_max"});
        }
      }
      u_last = rec.u;
      status_last = rec.status;
      rec.saturated = u_max && rec.u.norm() >= *u_max * (1.0 - 1e-9);

      // w is drawn once for the applied u and held with it until the next
      // control instant; the last record only logs w.
      NonlinearityQuery q;
      q.t = t;
      q.u = rec.u;
      q.c2 = ev.c2;
      q.index = static_cast<std::uint64_t>(k);
      rec.w = phi(q);
      if (k < steps) {
        for (long j = 0; j < substeps; ++j) x = rk4_step(plant, x, rec.u, rec.w, dt_sim, k);
      }
      rec.sector_ok = rec.w.norm() <= phi.theta() * rec.u.norm() + SectorNonlinearity::kSectorSlack;
      tr.rows.push_back(std::move(rec));
    } catch (const IntegrationError& e) {
      tr.rows.push_back(std::move(rec));
      fail(k, t, "integration-error", e);
      break;
    } catch (const SolverError& e) {
      fail(k, t, "solver-error", e);
      break;
    } catch (const DegeneracyError& e) {
      fail(k, t, "degeneracy-error", e);
      break;
    } catch (const ContractError& e) {
      fail(k, t, "contract-error", e);
      break;
    }
  }

  result.verdict = safety_monitor(tr, alpha, config.sim.violation_tol_rel);
  return result;
}

MonitorVerdict safety_monitor(const SimulationTrace& trace, double alpha, double tol_rel) {
  if (trace.rows.empty()) throw ContractError("safety_monitor: empty trace");
  MonitorVerdict v;
  const auto& rows = trace.rows;
  const double h0 = rows.front().h;
  v.tolerance = tol_rel * std::max(1.0, std::abs(h0));
  v.initial.in_safe_set = h0 >= 0.0;
  v.initial.in_c1_set = rows.front().lf_h + alpha * h0 >= 0.0;
  v.min_h = kInf;
  const bool filtered = trace.meta.architecture != "baseline-only";
  const double theta_nl = trace.meta.theta_nonlinearity;
  const double theta_f = trace.meta.theta_filter;
  bool covered_by_filter_theta = true;
  bool any_post_saturation = false;
  for (const auto& e : trace.events) {
    if (e.kind == "post-saturation") any_post_saturation = true;
  }
  for (const auto& r : rows) {
    if (r.h < v.min_h) {
      v.min_h = r.h;
      v.min_h_time = r.t;
    }
    if (!v.first_violation && r.h < -v.tolerance) v.first_violation = r.t;
    const double un = r.u.size() ? r.u.norm() : 0.0;
    const double wn = r.w.size() ? r.w.norm() : 0.0;
    if (wn > theta_nl * un + SectorNonlinearity::kSectorSlack) {
      v.sector_ok = false;
      ++v.sector_violations;
    }
    if (wn > theta_f * un + SectorNonlinearity::kSectorSlack) covered_by_filter_theta = false;
    if (r.status == FilterStatus::kInfeasibleFallback) ++v.fallback_count;
    if (r.degenerate) ++v.degenerate_count;
    if (r.saturated) ++v.saturated_count;
    v.max_abs_u = std::max(v.max_abs_u, un);
    v.control_energy += un * un * trace.meta.dt_ctrl;
  }
  v.all_feasible = filtered && v.fallback_count == 0 && v.degenerate_count == 0 && !any_post_saturation;
  v.completed = !trace.terminal.has_value();

  const std::size_t n = rows.size();
  v.exp_residual.assign(n, std::numeric_limits<double>::quiet_NaN());
  v.min_exp_residual = kInf;
  const double dt = trace.meta.dt_ctrl;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hd = (rows[i + 1].h - rows[i - 1].h) / (2.0 * dt);
    const double hdd = (rows[i + 1].h - 2.0 * rows[i].h + rows[i - 1].h) / (dt * dt);
    const double r = hdd + 2.0 * alpha * hd + alpha * alpha * rows[i].h;
    v.exp_residual[i] = r;
    v.min_exp_residual = std::min(v.min_exp_residual, r);
  }
  if (n < 3) v.min_exp_residual = kNaN;

  v.guarantee_applies = filtered && v.initial.both() && v.sector_ok && covered_by_filter_theta &&
                        v.all_feasible && v.completed;
  return v;
}

}  // namespace rtvcbf
