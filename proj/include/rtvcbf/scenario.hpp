#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtvcbf/barrier.hpp"
#include "rtvcbf/filter.hpp"
#include "rtvcbf/nonlinearity.hpp"
#include "rtvcbf/plant.hpp"

namespace rtvcbf {

enum class SaturationMode { kInProgram, kPostSaturate };

std::string_view saturation_mode_name(SaturationMode m);
std::optional<SaturationMode> parse_saturation_mode(std::string_view name);

struct PlantSection {
  /// Exactly one of car / (A, B) is used; car wins when both are given.
  std::optional<CarParams> car = CarParams{};
  Matrix A;
  Matrix B;
};

struct BarrierSection {
  MovingCircleBarrier::Params circle;
  double alpha = 8.6;
  double relative_degree_coeff = 1e-9;
};

struct FilterSection {
  double theta = 0.5;
  std::optional<double> u_max = deg_to_rad(40.0);  // radians internally
  SolverOptions solver;
  SaturationMode tvcbf_saturation = SaturationMode::kInProgram;
};

struct BaselineSection {
  Matrix K = (Matrix(1, 4) << 0.32, 0.18, 2.01, 0.16).finished();
  Vector reference = Vector::Zero(4);
  std::vector<int> lat_indices = {0, 1, 2, 3};
  bool saturate = false;
  /// Weights the gain came from; carried as provenance, never used.
  std::vector<double> q_weights = {2.0, 1.0, 1.0 / 30.0, 1.0};
  std::vector<double> r_weights = {20.0};
};

struct NonlinearitySection {
  NonlinearityParams params;
  std::optional<double> theta;  // defaults to filter.theta
};

struct SimSection {
  double dt_ctrl = 1e-3;
  double dt_sim = 1e-3;
  double horizon = 3.0;
  Vector x0 = (Vector(6) << 1.0, 0.0, 0.0, 0.0, -40.0, 28.0).finished();
  double violation_tol_rel = 1e-6;  // tolerance = rel * max(1, |h0|)
};

struct OutputSection {
  std::string trace = "trace.csv";
  std::string verdict = "verdict.json";
  double annotation_time = 1.1;
};

struct ScenarioConfig {
  std::string name = "scenario";
  PlantSection plant;
  BarrierSection barrier;
  FilterSection filter;
  BaselineSection baseline;
  NonlinearitySection nonlinearity;
  SimSection sim;
  OutputSection output;

  /// Re-checks every module invariant; throws ConfigError.
  void validate() const;
  LinearPlant build_plant() const;
  double nonlinearity_theta() const { return nonlinearity.theta.value_or(filter.theta); }
};

/// Parses the scenario text format (a YAML subset; see docs/formats.md).
/// `origin` names the source in error messages.
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<string>");
ScenarioConfig load_scenario(const std::string& path);

/// Canonical text form; parse_scenario(serialize_scenario(c)) == c field by field.
std::string serialize_scenario(const ScenarioConfig& c);

/// Applies `dotted.key=value`. The value `none` clears an optional key.
void apply_override(ScenarioConfig& c, const std::string& assignment);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string scenario_hash(const ScenarioConfig& c);

/// Every dotted key the format accepts, in canonical order.
const std::vector<std::string>& scenario_keys();

}  // namespace rtvcbf
