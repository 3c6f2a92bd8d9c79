#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the tensor layer. A scalar reference
// implementation always exists; an AVX2 (x86-64) or NEON (aarch64) variant is
// selected at runtime when the host supports it. All variants share one
// function-pointer table so the rest of the code never branches on ISA.
//
// Contracts common to every entry:
//   - buffers may not alias unless stated otherwise
//   - matmul_* overwrite C
//   - reduce_max returns the first maximal index on ties

namespace plus::kern {

enum class Isa { scalar, avx2, neon };

template <typename T>
struct Kernels {
  void (*add)(const T* a, const T* b, T* y, std::size_t n);
  void (*sub)(const T* a, const T* b, T* y, std::size_t n);
  void (*mul)(const T* a, const T* b, T* y, std::size_t n);
  void (*div)(const T* a, const T* b, T* y, std::size_t n);
  // y = alpha * x
  void (*scale)(const T* x, T alpha, T* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  T (*dot)(const T* a, const T* b, std::size_t n);
  T (*reduce_sum)(const T* x, std::size_t n);
  // max value; *argmax = first index attaining it
  T (*reduce_max)(const T* x, std::size_t n, std::size_t* argmax);
  bool (*all_finite)(const T* x, std::size_t n);
  // C[M x N] = A[M x K] * B[K x N], row-major
  void (*matmul_nn)(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
  // C[M x N] = A[M x K] * B[N x K]^T
  void (*matmul_nt)(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
  // C[M x N] = A[K x M]^T * B[K x N]
  void (*matmul_tn)(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
  const char* name;
};

// Table for the requested ISA; falls back to scalar when not compiled in.
const Kernels<float>& table_f32(Isa isa);
const Kernels<double>& table_f64(Isa isa);

// Runtime-selected active table. Honors the PLUS_KERNELS environment variable
// (scalar | avx2 | neon) and otherwise picks the best supported ISA.
Isa active_isa();
const char* isa_name(Isa isa);

template <typename T>
inline const Kernels<T>& active();

template <>
inline const Kernels<float>& active<float>() {
  static const Kernels<float>& t = table_f32(active_isa());
  return t;
}

template <>
inline const Kernels<double>& active<double>() {
  static const Kernels<double>& t = table_f64(active_isa());
  return t;
}

}  // namespace plus::kern
