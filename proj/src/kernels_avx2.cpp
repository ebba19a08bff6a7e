#include <immintrin.h>

#include <cmath>

#include "rtvcbf/kernels.hpp"

namespace rtvcbf::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline __m256d vneg(__m256d x) { return _mm256_xor_pd(x, _mm256_set1_pd(-0.0)); }
inline __m256d vabs(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }
inline __m256d lt(__m256d a, __m256d b) { return _mm256_cmp_pd(a, b, _CMP_LT_OQ); }
inline __m256d le(__m256d a, __m256d b) { return _mm256_cmp_pd(a, b, _CMP_LE_OQ); }
inline __m256d gt(__m256d a, __m256d b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
inline __m256d ge(__m256d a, __m256d b) { return _mm256_cmp_pd(a, b, _CMP_GE_OQ); }
// mask ? t : f
inline __m256d sel(__m256d mask, __m256d t, __m256d f) { return _mm256_blendv_pd(f, t, mask); }

struct LaneBest {
  __m256d value = _mm256_set1_pd(kInf);
  __m256d index = _mm256_set1_pd(-1.0);

  void update(__m256d v, __m256d k) {
    const __m256d better = lt(v, value);
    value = sel(better, v, value);
    index = sel(better, k, index);
  }

  ArgMin reduce() const {
    alignas(32) double vs[4], is[4];
    _mm256_store_pd(vs, value);
    _mm256_store_pd(is, index);
    ArgMin best;
    for (int l = 0; l < 4; ++l) {
      if (vs[l] < best.value || (vs[l] == best.value && vs[l] < kInf && is[l] < best.index)) {
        best.value = vs[l];
        best.index = static_cast<long>(is[l]);
      }
    }
    return best;
  }
};

inline __m256d lane_indices(std::size_t k) {
  const double b = static_cast<double>(k);
  return _mm256_set_pd(b + 3.0, b + 2.0, b + 1.0, b);
}

void margins_avx2(std::size_t n, const double* c1, const double* c2_norm, const double* theta,
                  const double* u_max, double* margin, std::uint8_t* feasible) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vc1 = _mm256_loadu_pd(c1 + i);
    const __m256d den = _mm256_mul_pd(_mm256_sub_pd(one, _mm256_loadu_pd(theta + i)),
                                      _mm256_loadu_pd(c2_norm + i));
    const __m256d threshold = _mm256_div_pd(vneg(vc1), den);
    const __m256d mg = _mm256_sub_pd(_mm256_loadu_pd(u_max + i), threshold);
    _mm256_storeu_pd(margin + i, mg);
    const int bits = _mm256_movemask_pd(_mm256_or_pd(ge(vc1, zero), ge(mg, zero)));
    for (int l = 0; l < 4; ++l) feasible[i + l] = (bits >> l) & 1;
  }
  for (; i < n; ++i) {
    const double threshold = -c1[i] / ((1.0 - theta[i]) * c2_norm[i]);
    margin[i] = u_max[i] - threshold;
    feasible[i] = (c1[i] >= 0.0 || margin[i] >= 0.0) ? 1 : 0;
  }
}

void certificates_avx2(std::size_t n, std::size_t m, const double* c1, const double* c2,
                       const double* theta, double* u, double* residual) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d n2 = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d c = _mm256_loadu_pd(c2 + j * n + i);
      n2 = _mm256_add_pd(n2, _mm256_mul_pd(c, c));
    }
    const __m256d vc1 = _mm256_loadu_pd(c1 + i);
    const __m256d vth = _mm256_loadu_pd(theta + i);
    const __m256d scale = _mm256_div_pd(vneg(vc1), _mm256_mul_pd(_mm256_sub_pd(one, vth), n2));
    __m256d dot = _mm256_setzero_pd(), uu = _mm256_setzero_pd();
    for (std::size_t j = 0; j < m; ++j) {
      const __m256d c = _mm256_loadu_pd(c2 + j * n + i);
      const __m256d uj = _mm256_mul_pd(scale, c);
      _mm256_storeu_pd(u + j * n + i, uj);
      dot = _mm256_add_pd(dot, _mm256_mul_pd(c, uj));
      uu = _mm256_add_pd(uu, _mm256_mul_pd(uj, uj));
    }
    const __m256d pen = _mm256_mul_pd(_mm256_mul_pd(vth, _mm256_sqrt_pd(n2)), _mm256_sqrt_pd(uu));
    _mm256_storeu_pd(residual + i, _mm256_sub_pd(_mm256_add_pd(vc1, dot), pen));
  }
  for (; i < n; ++i) {
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

ArgMin line_argmin_avx2(const LineData& d, double lo, double step, std::size_t count) {
  const double tn_s = d.theta * std::fabs(d.a);
  const __m256d tn = _mm256_set1_pd(tn_s);
  const __m256d vlo = _mm256_set1_pd(lo), vstep = _mm256_set1_pd(step);
  const __m256d c1 = _mm256_set1_pd(d.c1), a = _mm256_set1_pd(d.a);
  const __m256d u0 = _mm256_set1_pd(d.u0), umax = _mm256_set1_pd(d.u_max);
  const __m256d half = _mm256_set1_pd(0.5), zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(kInf);
  LaneBest lanes;
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const __m256d kv = lane_indices(k);
    const __m256d u = _mm256_add_pd(vlo, _mm256_mul_pd(kv, vstep));
    const __m256d au = vabs(u);
    const __m256d g = _mm256_sub_pd(_mm256_add_pd(c1, _mm256_mul_pd(a, u)), _mm256_mul_pd(tn, au));
    const __m256d du = _mm256_sub_pd(u, u0);
    const __m256d f = _mm256_mul_pd(half, _mm256_mul_pd(du, du));
    const __m256d ok = _mm256_and_pd(ge(g, zero), le(au, umax));
    lanes.update(sel(ok, f, inf), kv);
  }
  ArgMin best = lanes.reduce();
  for (; k < count; ++k) {
    const double u = lo + static_cast<double>(k) * step;
    const double au = std::fabs(u);
    const double g = (d.c1 + d.a * u) - tn_s * au;
    const double du = u - d.u0;
    const double f = 0.5 * (du * du);
    const double v = (g >= 0.0 && au <= d.u_max) ? f : kInf;
    if (v < best.value) {
      best.value = v;
      best.index = static_cast<long>(k);
    }
  }
  return best;
}

ArgMin polar_argmin_avx2(const PolarData& d, const double* cos_tab, const double* sin_tab,
                         std::size_t count) {
  const double tn_s = d.theta * std::sqrt(d.ax * d.ax + d.ay * d.ay);
  const __m256d tn = _mm256_set1_pd(tn_s);
  const __m256d ax = _mm256_set1_pd(d.ax), ay = _mm256_set1_pd(d.ay);
  const __m256d u0x = _mm256_set1_pd(d.u0x), u0y = _mm256_set1_pd(d.u0y);
  const __m256d c1 = _mm256_set1_pd(d.c1), umax = _mm256_set1_pd(d.u_max);
  const __m256d zero = _mm256_setzero_pd(), minus_one = _mm256_set1_pd(-1.0);
  const __m256d half = _mm256_set1_pd(0.5), inf = _mm256_set1_pd(kInf);
  const __m256d c1_neg = lt(c1, zero), c1_nonneg = ge(c1, zero);
  const __m256d lo_pos_num = vneg(c1);
  LaneBest lanes;
  std::size_t k = 0;
  for (; k + 4 <= count; k += 4) {
    const __m256d cx = _mm256_loadu_pd(cos_tab + k), cy = _mm256_loadu_pd(sin_tab + k);
    const __m256d s = _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(ax, cx), _mm256_mul_pd(ay, cy)), tn);
    const __m256d proj = _mm256_add_pd(_mm256_mul_pd(u0x, cx), _mm256_mul_pd(u0y, cy));
    const __m256d q = _mm256_div_pd(c1, vneg(s));
    const __m256d s_pos = gt(s, zero), s_neg = lt(s, zero);
    const __m256d lo_pos = sel(c1_neg, _mm256_div_pd(lo_pos_num, s), zero);
    const __m256d hi_neg = sel(c1_nonneg, sel(lt(q, umax), q, umax), minus_one);
    const __m256d hi_zero = sel(c1_nonneg, umax, minus_one);
    const __m256d lo = sel(s_pos, lo_pos, zero);
    const __m256d hi = sel(s_pos, umax, sel(s_neg, hi_neg, hi_zero));
    const __m256d ok = le(lo, hi);
    const __m256d r = sel(lt(proj, lo), lo, sel(gt(proj, hi), hi, proj));
    const __m256d ex = _mm256_sub_pd(_mm256_mul_pd(r, cx), u0x);
    const __m256d ey = _mm256_sub_pd(_mm256_mul_pd(r, cy), u0y);
    const __m256d f = _mm256_mul_pd(half, _mm256_add_pd(_mm256_mul_pd(ex, ex), _mm256_mul_pd(ey, ey)));
    lanes.update(sel(ok, f, inf), lane_indices(k));
  }
  ArgMin best = lanes.reduce();
  if (k < count) {
    const ArgMin tail = detail::kScalarTable.polar_argmin(d, cos_tab + k, sin_tab + k, count - k);
    if (tail.value < best.value) {
      best.value = tail.value;
      best.index = tail.index + static_cast<long>(k);
    }
  }
  return best;
}

}  // namespace

namespace detail {
const Table kAvx2Table = {margins_avx2, certificates_avx2, line_argmin_avx2, polar_argmin_avx2};
}  // namespace detail

}  // namespace rtvcbf::kernels
