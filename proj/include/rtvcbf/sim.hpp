#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rtvcbf/barrier.hpp"
#include "rtvcbf/filter.hpp"
#include "rtvcbf/plant.hpp"
#include "rtvcbf/scenario.hpp"

namespace rtvcbf {

enum class Architecture { kBaselineOnly, kTvcbf, kRtvcbf };

std::string_view architecture_name(Architecture a);
std::optional<Architecture> parse_architecture(std::string_view name);

/// Classical RK4 on x' = A x + B(u + w) with u, w held over the step.
/// Throws IntegrationError carrying `step` when the result is not finite.
Vector rk4_step(const LinearPlant& plant, const Vector& x, const Vector& u, const Vector& w,
                double dt, long step = -1);

/// One logged control step.
struct StepRecord {
  double t = 0.0;
  Vector x;
  Vector u0;
  Vector u;
  Vector w;
  double h = 0.0;
  double lf_h = 0.0;
  double c1 = 0.0;
  RowVector c2;
  double feas_margin = 0.0;
  FilterStatus status = FilterStatus::kBaselinePassthrough;
  bool degenerate = false;  // relative degree lost, previous control held
  bool saturated = false;   // |u| reached u_max
  bool sector_ok = true;
  double kkt = 0.0;         // max scaled KKT residual, 0 when not solved
};

struct TraceEvent {
  long step = 0;
  double t = 0.0;
  std::string kind;    // degeneracy | fallback | solver-error | integration-error | contract-error
  std::string detail;
};

struct TraceMeta {
  std::string version = RTVCBF_VERSION;
  std::string scenario;
  std::string config_hash;
  std::string architecture;
  std::string nonlinearity;
  double alpha = 0.0;
  double theta_filter = 0.0;
  double theta_nonlinearity = 0.0;
  double dt_ctrl = 0.0;
  double dt_sim = 0.0;
  double horizon = 0.0;
  std::optional<double> u_max;
  std::uint64_t seed = 0;
  int n = 0;
  int m = 0;
};

struct SimulationTrace {
  TraceMeta meta;
  std::vector<StateLabel> labels;
  std::vector<StepRecord> rows;
  std::vector<TraceEvent> events;
  /// Set when the run stopped early; rows hold everything up to that point.
  std::optional<TraceEvent> terminal;
};

struct MonitorVerdict {
  double min_h = 0.0;
  double min_h_time = 0.0;
  double tolerance = 0.0;
  std::optional<double> first_violation;  // first t with h < -tolerance
  InitialMembership initial;
  bool sector_ok = true;
  long sector_violations = 0;
  bool all_feasible = true;  // no fallback and no degeneracy on any step
  long fallback_count = 0;
  long degenerate_count = 0;
  long saturated_count = 0;
  double max_abs_u = 0.0;
  double control_energy = 0.0;  // sum |u|^2 dt_ctrl
  /// h'' + 2 alpha h' + alpha^2 h from central differences of logged h,
  /// NaN at the two ends.
  std::vector<double> exp_residual;
  double min_exp_residual = 0.0;
  /// Initial memberships, sector and feasibility all held.
  bool guarantee_applies = false;
  bool completed = true;
};

/// Post-hoc audit of a trace. `tol_rel` scales max(1, |h0|).
MonitorVerdict safety_monitor(const SimulationTrace& trace, double alpha, double tol_rel);

struct RunResult {
  SimulationTrace trace;
  MonitorVerdict verdict;
};

/// Runs the closed loop for one architecture. Numerical failures end the run
/// and are recorded in trace.terminal; configuration errors throw.
RunResult run_closed_loop(const ScenarioConfig& config, Architecture arch);

}  // namespace rtvcbf
