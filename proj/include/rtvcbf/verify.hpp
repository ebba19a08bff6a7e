#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtvcbf/filter.hpp"
#include "rtvcbf/rng.hpp"
#include "rtvcbf/scenario.hpp"

namespace rtvcbf {

/// Random filter instances for property checks.
class ProblemSampler {
 public:
  explicit ProblemSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  double log_uniform(double lo, double hi);
  double normal();

  /// u0 ~ N(0, s^2 I) with s log-uniform in [0.1, 10], c2 entries in
  /// [-5, 5], c1 in [-50, 50], theta in [0, theta_max]. No input bound.
  FilterProblem problem(int m, double theta_max = 0.95);
  /// As problem(), plus an input bound that is feasible unless
  /// `allow_infeasible` draws otherwise (about one case in five).
  FilterProblem bounded_problem(int m, double theta_max = 0.95, bool allow_infeasible = false);
  /// (c1 < 0, c2 != 0, theta in [0, theta_max]).
  FilterProblem certificate_problem(int m, double theta_max = 0.99);

 private:
  SplitMix64 rng_;
};

enum class Suite { kDerivatives, kSolver, kCertificates, kInvariance };

std::string_view suite_name(Suite s);
std::optional<Suite> parse_suite(std::string_view name);

struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  long samples = 0;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> results;
  bool passed() const;
  std::string to_json() const;
};

/// Runs one property suite with fixed seeds. The car scenario in `config`
/// feeds the derivative box and the closed-loop properties.
VerifyReport run_suite(Suite suite, const ScenarioConfig& config, std::uint64_t seed = 20240601);

/// Max over u of |u_solver - u_oracle|, and whether feasibility agreed.
struct OracleComparison {
  double max_u_error = 0.0;
  double max_kkt = 0.0;
  long infeasibility_mismatches = 0;
  long instances = 0;
};
OracleComparison compare_with_grid(ProblemSampler& sampler, int instances, bool with_ball);

}  // namespace rtvcbf
