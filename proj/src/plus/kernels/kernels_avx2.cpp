// AVX2/FMA variants. Compiled with -mavx2 -mfma; only reached after the
// dispatcher has verified CPU support.

#include <immintrin.h>

#include "plus/kernels/simd_common.hpp"

namespace plus::kern {
namespace {

struct VF32 {
  using elem = float;
  using reg = __m256;
  static constexpr std::size_t W = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float e) { return _mm256_set1_ps(e); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg r) { _mm256_storeu_ps(p, r); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg fma(reg a, reg b, reg acc) { return _mm256_fmadd_ps(a, b, acc); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static float reduce_add(reg r) {
    __m128 lo = _mm256_castps256_ps128(r);
    __m128 hi = _mm256_extractf128_ps(r, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
  static float reduce_max(reg r) {
    __m128 lo = _mm256_castps256_ps128(r);
    __m128 hi = _mm256_extractf128_ps(r, 1);
    __m128 s = _mm_max_ps(lo, hi);
    s = _mm_max_ps(s, _mm_movehl_ps(s, s));
    s = _mm_max_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
  static bool lanes_finite(reg r) {
    // x - x == 0 only for finite lanes
    __m256 d = _mm256_sub_ps(r, r);
    __m256 ok = _mm256_cmp_ps(d, _mm256_setzero_ps(), _CMP_EQ_OQ);
    return _mm256_movemask_ps(ok) == 0xff;
  }
};

struct VF64 {
  using elem = double;
  using reg = __m256d;
  static constexpr std::size_t W = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double e) { return _mm256_set1_pd(e); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg r) { _mm256_storeu_pd(p, r); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg fma(reg a, reg b, reg acc) { return _mm256_fmadd_pd(a, b, acc); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static double reduce_add(reg r) {
    __m128d lo = _mm256_castpd256_pd128(r);
    __m128d hi = _mm256_extractf128_pd(r, 1);
    __m128d s = _mm_add_pd(lo, hi);
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
  }
  static double reduce_max(reg r) {
    __m128d lo = _mm256_castpd256_pd128(r);
    __m128d hi = _mm256_extractf128_pd(r, 1);
    __m128d s = _mm_max_pd(lo, hi);
    s = _mm_max_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
  }
  static bool lanes_finite(reg r) {
    __m256d d = _mm256_sub_pd(r, r);
    __m256d ok = _mm256_cmp_pd(d, _mm256_setzero_pd(), _CMP_EQ_OQ);
    return _mm256_movemask_pd(ok) == 0xf;
  }
};

}  // namespace

const Kernels<float>& avx2_table_f32() {
  static const Kernels<float> t = simd::make_table<VF32>("avx2");
  return t;
}

const Kernels<double>& avx2_table_f64() {
  static const Kernels<double> t = simd::make_table<VF64>("avx2");
  return t;
}

}  // namespace plus::kern
