#include <cmath>

#include "rtvcbf/kernels.hpp"

namespace rtvcbf::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void margins_scalar(std::size_t n, const double* c1, const double* c2_norm, const double* theta,
                    const double* u_max, double* margin, std::uint8_t* feasible) {
  for (std::size_t i = 0; i < n; ++i) {
    const double threshold = -c1[i] / ((1.0 - theta[i]) * c2_norm[i]);
    margin[i] = u_max[i] - threshold;
    feasible[i] = (c1[i] >= 0.0 || margin[i] >= 0.0) ? 1 : 0;
  }
}

void certificates_scalar(std::size_t n, std::size_t m, const double* c1, const double* c2,
                         const double* theta, double* u, double* residual) {
  for (std::size_t i = 0; i < n; ++i) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) n2 = n2 + c2[j * n + i] * c2[j * n + i];
    const double scale = -c1[i] / ((1.0 - theta[i]) * n2);
    double dot = 0.0, uu = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double uj = scale * c2[j * n + i];
      u[j * n + i] = uj;
      dot = dot + c2[j * n + i] * uj;
      uu = uu + uj * uj;
    }
    residual[i] = (c1[i] + dot) - (theta[i] * std::sqrt(n2)) * std::sqrt(uu);
  }
}

ArgMin line_argmin_scalar(const LineData& d, double lo, double step, std::size_t count) {
  const double tn = d.theta * std::fabs(d.a);
  ArgMin best;
  for (std::size_t k = 0; k < count; ++k) {
    const double u = lo + static_cast<double>(k) * step;
    const double au = std::fabs(u);
    const double g = (d.c1 + d.a * u) - tn * au;
    const double du = u - d.u0;
    const double f = 0.5 * (du * du);
    const bool ok = g >= 0.0 && au <= d.u_max;
    const double v = ok ? f : kInf;
    if (v < best.value) {
      best.value = v;
      best.index = static_cast<long>(k);
    }
  }
  return best;
}

struct PolarEval {
  double r;
  double f;
  bool ok;
};

inline PolarEval polar_eval(const PolarData& d, double tn, double cx, double cy) {
  const double s = (d.ax * cx + d.ay * cy) - tn;
  const double proj = d.u0x * cx + d.u0y * cy;
  const double q = d.c1 / -s;
  double lo, hi;
  if (s > 0.0) {
    lo = d.c1 < 0.0 ? -d.c1 / s : 0.0;
    hi = d.u_max;
  } else if (s < 0.0) {
    lo = 0.0;
    hi = d.c1 >= 0.0 ? (q < d.u_max ? q : d.u_max) : -1.0;
  } else {
    lo = 0.0;
    hi = d.c1 >= 0.0 ? d.u_max : -1.0;
  }
  const bool ok = lo <= hi;
  const double r = proj < lo ? lo : (proj > hi ? hi : proj);
  const double ex = r * cx - d.u0x;
  const double ey = r * cy - d.u0y;
  return {r, 0.5 * (ex * ex + ey * ey), ok};
}

inline double polar_tn(const PolarData& d) {
  return d.theta * std::sqrt(d.ax * d.ax + d.ay * d.ay);
}

ArgMin polar_argmin_scalar(const PolarData& d, const double* cos_tab, const double* sin_tab,
                           std::size_t count) {
  const double tn = polar_tn(d);
  ArgMin best;
  for (std::size_t k = 0; k < count; ++k) {
    const PolarEval e = polar_eval(d, tn, cos_tab[k], sin_tab[k]);
    const double v = e.ok ? e.f : kInf;
    if (v < best.value) {
      best.value = v;
      best.index = static_cast<long>(k);
    }
  }
  return best;
}

}  // namespace

double polar_radius(const PolarData& d, double cx, double cy) {
  const PolarEval e = polar_eval(d, polar_tn(d), cx, cy);
  return e.ok ? e.r : -1.0;
}

namespace detail {
const Table kScalarTable = {margins_scalar, certificates_scalar, line_argmin_scalar,
                            polar_argmin_scalar};
}  // namespace detail

}  // namespace rtvcbf::kernels
