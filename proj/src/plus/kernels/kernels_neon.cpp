// NEON variants for aarch64. Same templated bodies as the AVX2 build; only
// the lane wrappers differ.

#include <arm_neon.h>

#include "plus/kernels/simd_common.hpp"

namespace plus::kern {
namespace {

struct VF32 {
  using elem = float;
  using reg = float32x4_t;
  static constexpr std::size_t W = 4;
  static reg zero() { return vdupq_n_f32(0.f); }
  static reg set1(float e) { return vdupq_n_f32(e); }
  static reg load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, reg r) { vst1q_f32(p, r); }
  static reg add(reg a, reg b) { return vaddq_f32(a, b); }
  static reg sub(reg a, reg b) { return vsubq_f32(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f32(a, b); }
  static reg div(reg a, reg b) { return vdivq_f32(a, b); }
  static reg fma(reg a, reg b, reg acc) { return vfmaq_f32(acc, a, b); }
  static reg max(reg a, reg b) { return vmaxq_f32(a, b); }
  static float reduce_add(reg r) { return vaddvq_f32(r); }
  static float reduce_max(reg r) { return vmaxvq_f32(r); }
  static bool lanes_finite(reg r) {
    uint32x4_t ok = vceqq_f32(vsubq_f32(r, r), vdupq_n_f32(0.f));
    return vminvq_u32(ok) != 0;
  }
};

struct VF64 {
  using elem = double;
  using reg = float64x2_t;
  static constexpr std::size_t W = 2;
  static reg zero() { return vdupq_n_f64(0.0); }
  static reg set1(double e) { return vdupq_n_f64(e); }
  static reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, reg r) { vst1q_f64(p, r); }
  static reg add(reg a, reg b) { return vaddq_f64(a, b); }
  static reg sub(reg a, reg b) { return vsubq_f64(a, b); }
  static reg mul(reg a, reg b) { return vmulq_f64(a, b); }
  static reg div(reg a, reg b) { return vdivq_f64(a, b); }
  static reg fma(reg a, reg b, reg acc) { return vfmaq_f64(acc, a, b); }
  static reg max(reg a, reg b) { return vmaxq_f64(a, b); }
  static double reduce_add(reg r) { return vaddvq_f64(r); }
  static double reduce_max(reg r) { return vmaxvq_f64(r); }
  static bool lanes_finite(reg r) {
    uint64x2_t ok = vceqq_f64(vsubq_f64(r, r), vdupq_n_f64(0.0));
    return vgetq_lane_u64(ok, 0) && vgetq_lane_u64(ok, 1);
  }
};

}  // namespace

const Kernels<float>& neon_table_f32() {
  static const Kernels<float> t = simd::make_table<VF32>("neon");
  return t;
}

const Kernels<double>& neon_table_f64() {
  static const Kernels<double> t = simd::make_table<VF64>("neon");
  return t;
}

}  // namespace plus::kern
