#pragma once

#include <Eigen/Dense>

namespace rtvcbf {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace rtvcbf
