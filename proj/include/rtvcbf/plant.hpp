#pragma once

#include <string>
#include <vector>

#include "rtvcbf/types.hpp"

namespace rtvcbf {

struct StateLabel {
  std::string name;
  std::string unit;
};

/// x' = A x + B (u + w): a linear time-invariant plant with a matched
/// input perturbation w.
class LinearPlant {
 public:
  LinearPlant(Matrix A, Matrix B, std::vector<StateLabel> labels = {});

  const Matrix& A() const noexcept { return A_; }
  const Matrix& B() const noexcept { return B_; }
  int n() const noexcept { return static_cast<int>(A_.rows()); }
  int m() const noexcept { return static_cast<int>(B_.cols()); }
  const std::vector<StateLabel>& labels() const noexcept { return labels_; }

  /// Returns A x + B (u + w).
  Vector dynamics(const Vector& x, const Vector& u, const Vector& w) const;

 private:
  Matrix A_;
  Matrix B_;
  std::vector<StateLabel> labels_;
};

/// Canonical car state layout [e, e_dot, psi, psi_dot, s, s_dot].
namespace car_state {
inline constexpr int kE = 0;
inline constexpr int kEDot = 1;
inline constexpr int kPsi = 2;
inline constexpr int kPsiDot = 3;
inline constexpr int kS = 4;
inline constexpr int kSDot = 5;
inline constexpr int kDim = 6;
}  // namespace car_state

/// Physical parameters of the linear single-track (bicycle) model.
/// Cornering stiffnesses are per axle.
struct CarParams {
  double mass = 1647.0;              // kg
  double yaw_inertia = 3484.0;       // kg m^2
  double cornering_front = 140000.0; // N/rad
  double cornering_rear = 145600.0;  // N/rad
  double front_axle = 1.05;          // m, CG to front axle
  double rear_axle = 1.47;           // m, CG to rear axle
  double speed = 28.0;               // m/s

  void validate() const;
  bool operator==(const CarParams&) const = default;
};

/// Lateral error dynamics of the single-track model at constant speed.
/// State [e, e_dot, psi, psi_dot], input: front steering angle [rad].
void car_lateral_matrices(const CarParams& params, Matrix& A_lat, Matrix& B_lat);

/// Six-state block-diagonal car: lateral single-track block plus a
/// constant-velocity longitudinal block that the steering does not reach.
LinearPlant build_car_plant(const CarParams& params);

/// u0 = K (r - x_lat), x_lat = x[lat_indices].
class BaselineController {
 public:
  BaselineController(Matrix K, Vector reference, std::vector<int> lat_indices);

  Vector control(const Vector& x) const;

  const Matrix& gain() const noexcept { return K_; }
  const Vector& reference() const noexcept { return r_; }
  const std::vector<int>& lat_indices() const noexcept { return idx_; }

 private:
  Matrix K_;
  Vector r_;
  std::vector<int> idx_;
};

}  // namespace rtvcbf
