#include <cstdlib>
#include <cstring>

#include "plus/kernels/kernels.hpp"

namespace plus::kern {

const Kernels<float>& scalar_table_f32();
const Kernels<double>& scalar_table_f64();
#ifdef PLUS_HAVE_AVX2
const Kernels<float>& avx2_table_f32();
const Kernels<double>& avx2_table_f64();
#endif
#ifdef PLUS_HAVE_NEON
const Kernels<float>& neon_table_f32();
const Kernels<double>& neon_table_f64();
#endif

namespace {

Isa detect() {
#ifdef PLUS_HAVE_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
#ifdef PLUS_HAVE_NEON
  return Isa::neon;
#endif
  return Isa::scalar;
}

bool available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#ifdef PLUS_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#ifdef PLUS_HAVE_NEON
      return true;
#else
      return false;
#endif
  }
  return false;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "?";
}

Isa active_isa() {
  static const Isa isa = [] {
    if (const char* env = std::getenv("PLUS_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
      if (std::strcmp(env, "avx2") == 0 && available(Isa::avx2)) return Isa::avx2;
      if (std::strcmp(env, "neon") == 0 && available(Isa::neon)) return Isa::neon;
    }
    return detect();
  }();
  return isa;
}

const Kernels<float>& table_f32(Isa isa) {
  switch (isa) {
#ifdef PLUS_HAVE_AVX2
    case Isa::avx2:
      return avx2_table_f32();
#endif
#ifdef PLUS_HAVE_NEON
    case Isa::neon:
      return neon_table_f32();
#endif
    default:
      return scalar_table_f32();
  }
}

const Kernels<double>& table_f64(Isa isa) {
  switch (isa) {
#ifdef PLUS_HAVE_AVX2
    case Isa::avx2:
      return avx2_table_f64();
#endif
#ifdef PLUS_HAVE_NEON
    case Isa::neon:
      return neon_table_f64();
#endif
    default:
      return scalar_table_f64();
  }
}

}  // namespace plus::kern
