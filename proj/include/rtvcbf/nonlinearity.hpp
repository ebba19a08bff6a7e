#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "rtvcbf/types.hpp"

namespace rtvcbf {

enum class NonlinearityKind {
  kNone,
  kWorstCaseAdversary,
  kConstantGain,
  kTimeVaryingGain,
  kRandomBounded,
  kSaturationResidual,
};

std::string_view nonlinearity_name(NonlinearityKind k);
std::optional<NonlinearityKind> parse_nonlinearity(std::string_view name);

struct NonlinearityParams {
  NonlinearityKind kind = NonlinearityKind::kWorstCaseAdversary;
  double gain = -1.0;       // constant-gain: w = gain * theta * u, gain in [-1, 1]
  double frequency = 1.0;   // time-varying-gain: w = theta sin(2 pi f t + phase) u
  double phase = 0.0;
  double level = 0.35;      // saturation-residual: actuator limit applied to |u|
  std::uint64_t seed = 0;   // random-bounded
  bool operator==(const NonlinearityParams&) const = default;
};

/// What the perturbation may observe when producing w.
struct NonlinearityQuery {
  double t = 0.0;
  Vector u;
  RowVector c2;  // may be empty or zero; the adversary then returns w = 0
  std::uint64_t index = 0;  // query counter, drives random-bounded
};

/// Memoryless sector-bounded perturbation |w| <= theta |u|.
class SectorNonlinearity {
 public:
  SectorNonlinearity(NonlinearityParams params, double theta);

  /// Throws ContractError if the produced w leaves the sector.
  Vector operator()(const NonlinearityQuery& q) const;

  NonlinearityKind kind() const { return p_.kind; }
  double theta() const { return theta_; }
  const NonlinearityParams& params() const { return p_; }

  static constexpr double kSectorSlack = 1e-12;

 private:
  Vector raw(const NonlinearityQuery& q) const;

  NonlinearityParams p_;
  double theta_;
};

}  // namespace rtvcbf
