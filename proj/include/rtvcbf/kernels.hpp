#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace rtvcbf::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

struct ArgMin {
  long index = -1;  // -1 when no finite value was seen
  double value = std::numeric_limits<double>::infinity();
};

/// Scalar-input robust constraint data for the 1-D grid scan.
struct LineData {
  double u0 = 0.0;
  double c1 = 0.0;
  double a = 0.0;      // c2
  double theta = 0.0;
  double u_max = std::numeric_limits<double>::infinity();
};

/// Two-input data for the polar scan: directions come from cos/sin tables,
/// and the radius along each direction is the exact 1-D minimiser.
struct PolarData {
  double u0x = 0.0, u0y = 0.0;
  double c1 = 0.0;
  double ax = 0.0, ay = 0.0;
  double theta = 0.0;
  double u_max = std::numeric_limits<double>::infinity();
};

struct Table {
  /// margin[i] = u_max[i] + c1[i] / ((1 - theta[i]) c2_norm[i]),
  /// feasible[i] = c1[i] >= 0 || margin[i] >= 0.
  void (*feasibility_margins)(std::size_t n, const double* c1, const double* c2_norm,
                              const double* theta, const double* u_max, double* margin,
                              std::uint8_t* feasible);
  /// Certificates for n problems of input size m. c2 and u are column
  /// blocks: entry j of problem i lives at [j * n + i]. residual[i] is the
  /// robust constraint value at u.
  void (*certificates)(std::size_t n, std::size_t m, const double* c1, const double* c2,
                       const double* theta, double* u, double* residual);
  /// argmin over u_k = lo + k * step, k < count, of 1/2 (u_k - u0)^2 with
  /// infeasible points scored +inf. Ties go to the lowest index.
  ArgMin (*line_argmin)(const LineData& d, double lo, double step, std::size_t count);
  /// argmin over directions k of the best objective along (cos[k], sin[k]).
  ArgMin (*polar_argmin)(const PolarData& d, const double* cos_tab, const double* sin_tab,
                         std::size_t count);
};

/// Radius chosen by the polar scan along unit direction (cx, cy); negative
/// when the ray holds no feasible point.
double polar_radius(const PolarData& d, double cx, double cy);

bool avx2_available();

/// Table for a specific ISA; throws ContractError if it is not available.
const Table& table(Isa isa);

/// Table picked at first use: AVX2 when the CPU has it, unless
/// RTVCBF_SIMD=scalar is set in the environment.
const Table& active();
Isa active_isa();

namespace detail {
extern const Table kScalarTable;
#if RTVCBF_HAVE_AVX2
extern const Table kAvx2Table;
#endif
}  // namespace detail

}  // namespace rtvcbf::kernels
