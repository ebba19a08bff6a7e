#include "rtvcbf/nonlinearity.hpp"

#include <cmath>
#include <sstream>

#include "rtvcbf/errors.hpp"
#include "rtvcbf/rng.hpp"

namespace rtvcbf {

namespace {

constexpr NonlinearityKind kAllKinds[] = {
    NonlinearityKind::kNone,          NonlinearityKind::kWorstCaseAdversary,
    NonlinearityKind::kConstantGain,  NonlinearityKind::kTimeVaryingGain,
    NonlinearityKind::kRandomBounded, NonlinearityKind::kSaturationResidual,
};

}  // namespace

std::string_view nonlinearity_name(NonlinearityKind k) {
  switch (k) {
    case NonlinearityKind::kNone: return "none";
    case NonlinearityKind::kWorstCaseAdversary: return "worst-case-adversary";
    case NonlinearityKind::kConstantGain: return "constant-gain";
    case NonlinearityKind::kTimeVaryingGain: return "time-varying-gain";
    case NonlinearityKind::kRandomBounded: return "random-bounded";
    case NonlinearityKind::kSaturationResidual: return "saturation-residual";
  }
  return "unknown";
}

std::optional<NonlinearityKind> parse_nonlinearity(std::string_view name) {
  for (auto k : kAllKinds) {
    if (nonlinearity_name(k) == name) return k;
  }
  return std::nullopt;
}

SectorNonlinearity::SectorNonlinearity(NonlinearityParams params, double theta)
    : p_(params), theta_(theta) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw ConfigError("nonlinearity: theta must lie in [0, 1)");
  }
  if (p_.kind == NonlinearityKind::kConstantGain && !(std::abs(p_.gain) <= 1.0)) {
    throw ConfigError("nonlinearity: constant-gain gain must lie in [-1, 1]");
  }
  if (p_.kind == NonlinearityKind::kTimeVaryingGain &&
      !(std::isfinite(p_.frequency) && std::isfinite(p_.phase))) {
    throw ConfigError("nonlinearity: frequency and phase must be finite");
  }
  if (p_.kind == NonlinearityKind::kSaturationResidual && !(p_.level > 0.0)) {
    throw ConfigError("nonlinearity: saturation level must be > 0");
  }
}

Vector SectorNonlinearity::raw(const NonlinearityQuery& q) const {
  const Vector& u = q.u;
  const int m = static_cast<int>(u.size());
  switch (p_.kind) {
    case NonlinearityKind::kNone:
      return Vector::Zero(m);
    case NonlinearityKind::kWorstCaseAdversary: {
      const double n = q.c2.size() == m ? q.c2.norm() : 0.0;
      if (!(n > 0.0)) return Vector::Zero(m);
      return (-theta_ * u.norm() / n) * q.c2.transpose();
    }
    case NonlinearityKind::kConstantGain:
      return (p_.gain * theta_) * u;
    case NonlinearityKind::kTimeVaryingGain:
      return (theta_ * std::sin(2.0 * kPi * p_.frequency * q.t + p_.phase)) * u;
    case NonlinearityKind::kRandomBounded: {
      // Uniform in the ball of radius theta |u|: Gaussian direction, radius
      // U^(1/m). Each query uses its own block of counters.
      const std::uint64_t base = q.index * static_cast<std::uint64_t>(2 * m + 2);
      Vector dir(m);
      for (int j = 0; j < m; ++j) {
        const double u1 = SplitMix64::to_unit(SplitMix64::at(p_.seed, base + 2 * j));
        const double u2 = SplitMix64::to_unit(SplitMix64::at(p_.seed, base + 2 * j + 1));
        dir(j) = std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * kPi * u2);
      }
      const double dn = dir.norm();
      if (!(dn > 0.0)) return Vector::Zero(m);
      const double ur = SplitMix64::to_unit(SplitMix64::at(p_.seed, base + 2 * m));
      const double radius = std::pow(ur, 1.0 / m);
      return (theta_ * u.norm() * radius / dn) * dir;
    }
    case NonlinearityKind::kSaturationResidual: {
      const double n = u.norm();
      if (n <= p_.level) return Vector::Zero(m);
      Vector w = (p_.level / n - 1.0) * u;
      const double cap = theta_ * n;
      if (w.norm() > cap) w *= cap / w.norm();
      return w;
    }
  }
  return Vector::Zero(m);
}

Vector SectorNonlinearity::operator()(const NonlinearityQuery& q) const {
  Vector w = raw(q);
  const double bound = theta_ * q.u.norm() + kSectorSlack;
  if (!w.allFinite() || w.norm() > bound) {
    std::ostringstream os;
    os.precision(17);
    os << "nonlinearity " << nonlinearity_name(p_.kind) << " left the sector at t=" << q.t
       << ": |w|=" << w.norm() << " > theta |u| = " << theta_ * q.u.norm();
    throw ContractError(os.str());
  }
  return w;
}

}  // namespace rtvcbf
