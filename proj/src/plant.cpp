#include "rtvcbf/plant.hpp"

#include <cmath>
#include <sstream>

#include "rtvcbf/errors.hpp"

namespace rtvcbf {

LinearPlant::LinearPlant(Matrix A, Matrix B, std::vector<StateLabel> labels)
    : A_(std::move(A)), B_(std::move(B)), labels_(std::move(labels)) {
  if (A_.rows() < 1 || A_.rows() != A_.cols()) {
    throw ConfigError("plant: A must be square with n >= 1");
  }
  if (B_.rows() != A_.rows() || B_.cols() < 1) {
    throw ConfigError("plant: B must be n x m with m >= 1");
  }
  if (!A_.allFinite() || !B_.allFinite()) {
    throw ConfigError("plant: A and B entries must be finite");
  }
  if (labels_.empty()) {
    for (int i = 0; i < n(); ++i) labels_.push_back({"x" + std::to_string(i), ""});
  } else if (static_cast<int>(labels_.size()) != n()) {
    throw ConfigError("plant: one label per state required");
  }
}

Vector LinearPlant::dynamics(const Vector& x, const Vector& u, const Vector& w) const {
  if (x.size() != n() || u.size() != m() || w.size() != m()) {
    std::ostringstream os;
    os << "dynamics: dimension mismatch (x " << x.size() << ", u " << u.size()
       << ", w " << w.size() << " for n=" << n() << ", m=" << m() << ")";
    throw ContractError(os.str());
  }
  return A_ * x + B_ * (u + w);
}

void CarParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError(std::string("plant.car.") + name + " must be finite and > 0");
    }
  };
  positive(mass, "mass");
  positive(yaw_inertia, "yaw_inertia");
  positive(cornering_front, "cornering_front");
  positive(cornering_rear, "cornering_rear");
  positive(front_axle, "front_axle");
  positive(rear_axle, "rear_axle");
  positive(speed, "speed");
}

void car_lateral_matrices(const CarParams& p, Matrix& A_lat, Matrix& B_lat) {
  p.validate();
  const double cf = p.cornering_front;
  const double cr = p.cornering_rear;
  const double lf = p.front_axle;
  const double lr = p.rear_axle;
  const double m = p.mass;
  const double iz = p.yaw_inertia;
  const double vx = p.speed;

  A_lat = Matrix::Zero(4, 4);
  A_lat(0, 1) = 1.0;
  A_lat(1, 1) = -(cf + cr) / (m * vx);
  A_lat(1, 2) = (cf + cr) / m;
  A_lat(1, 3) = (cr * lr - cf * lf) / (m * vx);
  A_lat(2, 3) = 1.0;
  A_lat(3, 1) = (cr * lr - cf * lf) / (iz * vx);
  A_lat(3, 2) = (cf * lf - cr * lr) / iz;
  A_lat(3, 3) = -(cf * lf * lf + cr * lr * lr) / (iz * vx);

  B_lat = Matrix::Zero(4, 1);
  B_lat(1, 0) = cf / m;
  B_lat(3, 0) = cf * lf / iz;
}

LinearPlant build_car_plant(const CarParams& params) {
  Matrix A_lat, B_lat;
  car_lateral_matrices(params, A_lat, B_lat);

  Matrix A = Matrix::Zero(car_state::kDim, car_state::kDim);
  A.topLeftCorner(4, 4) = A_lat;
  A(car_state::kS, car_state::kSDot) = 1.0;

  Matrix B = Matrix::Zero(car_state::kDim, 1);
  B.topRows(4) = B_lat;

  std::vector<StateLabel> labels = {
      {"e", "m"}, {"e_dot", "m/s"}, {"psi", "rad"},
      {"psi_dot", "rad/s"}, {"s", "m"}, {"s_dot", "m/s"}};
  return LinearPlant(std::move(A), std::move(B), std::move(labels));
}

BaselineController::BaselineController(Matrix K, Vector reference, std::vector<int> lat_indices)
    : K_(std::move(K)), r_(std::move(reference)), idx_(std::move(lat_indices)) {
  if (K_.cols() != static_cast<Eigen::Index>(idx_.size()) || K_.rows() < 1) {
    throw ConfigError("baseline: gain must be m x len(state_indices)");
  }
  if (r_.size() != K_.cols()) {
    throw ConfigError("baseline: reference length must match state_indices");
  }
  if (!K_.allFinite() || !r_.allFinite()) {
    throw ConfigError("baseline: gain and reference must be finite");
  }
  for (int i : idx_) {
    if (i < 0) throw ConfigError("baseline: negative state index");
  }
}

Vector BaselineController::control(const Vector& x) const {
  Vector err(r_.size());
  for (std::size_t k = 0; k < idx_.size(); ++k) {
    if (idx_[k] >= x.size()) throw ContractError("baseline: state index out of range");
    err(static_cast<Eigen::Index>(k)) = r_(static_cast<Eigen::Index>(k)) - x(idx_[k]);
  }
  return K_ * err;
}

}  // namespace rtvcbf
