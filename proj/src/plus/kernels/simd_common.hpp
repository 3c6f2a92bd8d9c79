#pragma once

#include <cstddef>

#include "plus/kernels/kernels.hpp"

// Kernel bodies shared by the AVX2 and NEON translation units. Each TU
// supplies a vector wrapper V with:
//   elem, reg, W, zero(), set1(e), load(p), store(p, r),
//   add/sub/mul/div(r, r), fma(a, b, acc), max(r, r),
//   reduce_add(r), reduce_max(r), lanes_finite(r)
// The wrapper is the only ISA-specific code; everything below is generic.

namespace plus::kern::simd {

template <class V>
void add_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* y,
           std::size_t n) {
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

template <class V>
void sub_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* y,
           std::size_t n) {
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::sub(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}

template <class V>
void mul_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* y,
           std::size_t n) {
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::mul(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

template <class V>
void div_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* y,
           std::size_t n) {
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::div(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] / b[i];
}

template <class V>
void scale_v(const typename V::elem* x, typename V::elem alpha, typename V::elem* y,
             std::size_t n) {
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

template <class V>
void axpy_v(typename V::elem alpha, const typename V::elem* x, typename V::elem* y,
            std::size_t n) {
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class V>
typename V::elem dot_v(const typename V::elem* a, const typename V::elem* b, std::size_t n) {
  auto s0 = V::zero(), s1 = V::zero(), s2 = V::zero(), s3 = V::zero();
  std::size_t i = 0;
  for (; i + 4 * V::W <= n; i += 4 * V::W) {
    s0 = V::fma(V::load(a + i), V::load(b + i), s0);
    s1 = V::fma(V::load(a + i + V::W), V::load(b + i + V::W), s1);
    s2 = V::fma(V::load(a + i + 2 * V::W), V::load(b + i + 2 * V::W), s2);
    s3 = V::fma(V::load(a + i + 3 * V::W), V::load(b + i + 3 * V::W), s3);
  }
  for (; i + V::W <= n; i += V::W) s0 = V::fma(V::load(a + i), V::load(b + i), s0);
  typename V::elem acc =
      V::reduce_add(V::add(V::add(s0, s1), V::add(s2, s3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class V>
typename V::elem reduce_sum_v(const typename V::elem* x, std::size_t n) {
  auto s0 = V::zero(), s1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::W <= n; i += 2 * V::W) {
    s0 = V::add(s0, V::load(x + i));
    s1 = V::add(s1, V::load(x + i + V::W));
  }
  for (; i + V::W <= n; i += V::W) s0 = V::add(s0, V::load(x + i));
  typename V::elem acc = V::reduce_add(V::add(s0, s1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

// Vector pass finds the max value; a scalar rescan finds its first index.
// Lane max preserves exact values, so the rescan comparison is exact.
template <class V>
typename V::elem reduce_max_v(const typename V::elem* x, std::size_t n, std::size_t* argmax) {
  using T = typename V::elem;
  T best;
  if (n >= V::W) {
    auto m = V::load(x);
    std::size_t i = V::W;
    for (; i + V::W <= n; i += V::W) m = V::max(m, V::load(x + i));
    best = V::reduce_max(m);
    for (; i < n; ++i)
      if (x[i] > best) best = x[i];
  } else {
    best = x[0];
    for (std::size_t i = 1; i < n; ++i)
      if (x[i] > best) best = x[i];
  }
  if (argmax) {
    std::size_t bi = 0;
    while (x[bi] != best) ++bi;
    *argmax = bi;
  }
  return best;
}

template <class V>
bool all_finite_v(const typename V::elem* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    if (!V::lanes_finite(V::load(x + i))) return false;
  }
  for (; i < n; ++i) {
    // x - x is 0 for finite values, NaN for inf/NaN
    typename V::elem d = x[i] - x[i];
    if (!(d == typename V::elem(0))) return false;
  }
  return true;
}

// Register-tiled GEMM micro-kernel: MR rows of C, NB vectors per row,
// k accumulated in registers. TA selects A[K x M]^T indexing.
template <class V, bool TA, int MR, int NB>
inline void mm_tile(const typename V::elem* a, std::size_t lda, const typename V::elem* b,
                    std::size_t ldb, typename V::elem* c, std::size_t ldc, std::size_t k) {
  typename V::reg acc[MR][NB];
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NB; ++q) acc[r][q] = V::zero();
  for (std::size_t p = 0; p < k; ++p) {
    typename V::reg bv[NB];
    for (int q = 0; q < NB; ++q) bv[q] = V::load(b + p * ldb + q * V::W);
    for (int r = 0; r < MR; ++r) {
      const auto av = V::set1(TA ? a[p * lda + r] : a[r * lda + p]);
      for (int q = 0; q < NB; ++q) acc[r][q] = V::fma(av, bv[q], acc[r][q]);
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NB; ++q) V::store(c + r * ldc + q * V::W, acc[r][q]);
}

template <class V, bool TA, int MR>
inline void mm_tail_cols(const typename V::elem* a, std::size_t lda, const typename V::elem* b,
                         std::size_t ldb, typename V::elem* c, std::size_t ldc, std::size_t k,
                         std::size_t ncols) {
  using T = typename V::elem;
  for (int r = 0; r < MR; ++r) {
    for (std::size_t j = 0; j < ncols; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p)
        acc += (TA ? a[p * lda + r] : a[r * lda + p]) * b[p * ldb + j];
      c[r * ldc + j] = acc;
    }
  }
}

// Shared driver for NN (TA=false, A row-major [M x K]) and TN (TA=true,
// A stored [K x M]). B is [K x N], C is [M x N].
template <class V, bool TA>
void mm_driver(const typename V::elem* a, const typename V::elem* b, typename V::elem* c,
               std::size_t m, std::size_t k, std::size_t n) {
  const std::size_t lda = TA ? m : k;
  auto ablock = [&](std::size_t i) { return TA ? a + i : a + i * k; };
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 2 * V::W <= n; j += 2 * V::W)
      mm_tile<V, TA, 4, 2>(ablock(i), lda, b + j, n, c + i * n + j, n, k);
    for (; j + V::W <= n; j += V::W)
      mm_tile<V, TA, 4, 1>(ablock(i), lda, b + j, n, c + i * n + j, n, k);
    if (j < n) mm_tail_cols<V, TA, 4>(ablock(i), lda, b + j, n, c + i * n + j, n, k, n - j);
  }
  for (; i < m; ++i) {
    std::size_t j = 0;
    for (; j + 2 * V::W <= n; j += 2 * V::W)
      mm_tile<V, TA, 1, 2>(ablock(i), lda, b + j, n, c + i * n + j, n, k);
    for (; j + V::W <= n; j += V::W)
      mm_tile<V, TA, 1, 1>(ablock(i), lda, b + j, n, c + i * n + j, n, k);
    if (j < n) mm_tail_cols<V, TA, 1>(ablock(i), lda, b + j, n, c + i * n + j, n, k, n - j);
  }
}

template <class V>
void matmul_nn_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* c,
                 std::size_t m, std::size_t k, std::size_t n) {
  mm_driver<V, false>(a, b, c, m, k, n);
}

template <class V>
void matmul_tn_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* c,
                 std::size_t m, std::size_t k, std::size_t n) {
  mm_driver<V, true>(a, b, c, m, k, n);
}

template <class V>
void matmul_nt_v(const typename V::elem* a, const typename V::elem* b, typename V::elem* c,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_v<V>(a + i * k, b + j * k, k);
}

template <class V>
Kernels<typename V::elem> make_table(const char* name) {
  return Kernels<typename V::elem>{
      add_v<V>,        sub_v<V>,        mul_v<V>,       div_v<V>,
      scale_v<V>,      axpy_v<V>,       dot_v<V>,       reduce_sum_v<V>,
      reduce_max_v<V>, all_finite_v<V>, matmul_nn_v<V>, matmul_nt_v<V>,
      matmul_tn_v<V>,  name,
  };
}

}  // namespace plus::kern::simd
