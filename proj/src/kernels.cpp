#include "rtvcbf/kernels.hpp"

#include <cstdlib>
#include <string>

#include "rtvcbf/errors.hpp"

namespace rtvcbf::kernels {

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

bool avx2_available() {
#if RTVCBF_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Table& table(Isa isa) {
  if (isa == Isa::kScalar) return detail::kScalarTable;
#if RTVCBF_HAVE_AVX2
  if (avx2_available()) return detail::kAvx2Table;
#endif
  throw ContractError("kernels: AVX2 requested but not available on this build or CPU");
}

namespace {

Isa pick() {
  const char* env = std::getenv("RTVCBF_SIMD");
  if (env != nullptr && std::string(env) == "scalar") return Isa::kScalar;
  return avx2_available() ? Isa::kAvx2 : Isa::kScalar;
}

}  // namespace

Isa active_isa() {
  static const Isa isa = pick();
  return isa;
}

const Table& active() { return table(active_isa()); }

}  // namespace rtvcbf::kernels
