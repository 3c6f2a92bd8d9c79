#include <cmath>
#include <cstring>

#include "plus/kernels/kernels.hpp"

namespace plus::kern {
namespace {

template <typename T>
void add_ref(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void sub_ref(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

template <typename T>
void mul_ref(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void div_ref(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] / b[i];
}

template <typename T>
void scale_ref(const T* x, T alpha, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <typename T>
void axpy_ref(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T dot_ref(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T reduce_sum_ref(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T reduce_max_ref(const T* x, std::size_t n, std::size_t* argmax) {
  T best = x[0];
  std::size_t bi = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] > best) {
      best = x[i];
      bi = i;
    }
  }
  if (argmax) *argmax = bi;
  return best;
}

template <typename T>
bool all_finite_ref(const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

template <typename T>
void matmul_nn_ref(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(T));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void matmul_nt_ref(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      const T* arow = a + i * k;
      const T* brow = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void matmul_tn_ref(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(T));
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[p * m + i];
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
constexpr Kernels<T> make_scalar_table() {
  return Kernels<T>{
      add_ref<T>,        sub_ref<T>,        mul_ref<T>,       div_ref<T>,
      scale_ref<T>,      axpy_ref<T>,       dot_ref<T>,       reduce_sum_ref<T>,
      reduce_max_ref<T>, all_finite_ref<T>, matmul_nn_ref<T>, matmul_nt_ref<T>,
      matmul_tn_ref<T>,  "scalar",
  };
}

}  // namespace

const Kernels<float>& scalar_table_f32() {
  static const Kernels<float> t = make_scalar_table<float>();
  return t;
}

const Kernels<double>& scalar_table_f64() {
  static const Kernels<double> t = make_scalar_table<double>();
  return t;
}

}  // namespace plus::kern
