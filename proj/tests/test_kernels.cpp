// Equivalence of the runtime-selected SIMD kernels against the scalar
// reference on randomized buffers, including remainder-lane sizes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "plus/core/rng.hpp"
#include "plus/kernels/kernels.hpp"

using plus::Rng;
namespace kern = plus::kern;

namespace {

template <typename T>
std::vector<T> random_buf(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<T> v(n);
  for (auto& e : v) e = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <typename T>
void expect_close(const std::vector<T>& a, const std::vector<T>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(double(a[i]) - double(b[i]));
    const double scale = std::max(1.0, std::abs(double(b[i])));
    CHECK(d <= tol * scale);
  }
}

template <typename T>
const kern::Kernels<T>& scalar_table() {
  if constexpr (std::is_same_v<T, float>) {
    return kern::table_f32(kern::Isa::scalar);
  } else {
    return kern::table_f64(kern::Isa::scalar);
  }
}

template <typename T>
void run_elementwise_equivalence(double tol) {
  const auto& r = scalar_table<T>();
  const auto& s = kern::active<T>();
  Rng rng(123);
  for (std::size_t n : {1u, 2u, 7u, 8u, 9u, 31u, 64u, 67u, 500u}) {
    auto a = random_buf<T>(rng, n);
    auto b = random_buf<T>(rng, n, 0.5, 2.0);
    std::vector<T> y1(n), y2(n);

    r.add(a.data(), b.data(), y1.data(), n);
    s.add(a.data(), b.data(), y2.data(), n);
    expect_close(y1, y2, 0.0);

    r.sub(a.data(), b.data(), y1.data(), n);
    s.sub(a.data(), b.data(), y2.data(), n);
    expect_close(y1, y2, 0.0);

    r.mul(a.data(), b.data(), y1.data(), n);
    s.mul(a.data(), b.data(), y2.data(), n);
    expect_close(y1, y2, 0.0);

    r.div(a.data(), b.data(), y1.data(), n);
    s.div(a.data(), b.data(), y2.data(), n);
    expect_close(y1, y2, tol);

    r.scale(a.data(), T(1.7), y1.data(), n);
    s.scale(a.data(), T(1.7), y2.data(), n);
    expect_close(y1, y2, 0.0);

    y1 = b;
    y2 = b;
    r.axpy(T(0.3), a.data(), y1.data(), n);
    s.axpy(T(0.3), a.data(), y2.data(), n);
    expect_close(y1, y2, tol);

    const double d1 = r.dot(a.data(), b.data(), n);
    const double d2 = s.dot(a.data(), b.data(), n);
    CHECK(std::abs(d1 - d2) <= tol * std::max(1.0, std::abs(d1)));

    const double s1 = r.reduce_sum(a.data(), n);
    const double s2 = s.reduce_sum(a.data(), n);
    CHECK(std::abs(s1 - s2) <= tol * std::max(1.0, std::abs(s1)));

    std::size_t i1 = 0, i2 = 0;
    const T m1 = r.reduce_max(a.data(), n, &i1);
    const T m2 = s.reduce_max(a.data(), n, &i2);
    CHECK(m1 == m2);
    CHECK(i1 == i2);

    CHECK(r.all_finite(a.data(), n));
    CHECK(s.all_finite(a.data(), n));
  }
}

template <typename T>
void run_matmul_equivalence(double tol) {
  const auto& r = scalar_table<T>();
  const auto& s = kern::active<T>();
  Rng rng(77);
  const std::size_t sizes[][3] = {
      {1, 1, 1}, {2, 3, 4}, {4, 4, 16}, {5, 7, 17}, {8, 216, 33}, {13, 5, 40}, {16, 32, 64},
  };
  for (const auto& mkn : sizes) {
    const auto m = mkn[0], k = mkn[1], n = mkn[2];
    auto a = random_buf<T>(rng, m * k);
    auto b = random_buf<T>(rng, k * n);
    auto bt = random_buf<T>(rng, n * k);
    auto at = random_buf<T>(rng, k * m);
    std::vector<T> c1(m * n), c2(m * n);

    r.matmul_nn(a.data(), b.data(), c1.data(), m, k, n);
    s.matmul_nn(a.data(), b.data(), c2.data(), m, k, n);
    expect_close(c1, c2, tol);

    r.matmul_nt(a.data(), bt.data(), c1.data(), m, k, n);
    s.matmul_nt(a.data(), bt.data(), c2.data(), m, k, n);
    expect_close(c1, c2, tol);

    r.matmul_tn(at.data(), b.data(), c1.data(), m, k, n);
    s.matmul_tn(at.data(), b.data(), c2.data(), m, k, n);
    expect_close(c1, c2, tol);
  }
}

}  // namespace

TEST_CASE("active ISA is reported") {
  const auto& kf = kern::active<float>();
  const auto& kd = kern::active<double>();
  CHECK(kf.name == std::string(kern::isa_name(kern::active_isa())));
  CHECK(kd.name == std::string(kern::isa_name(kern::active_isa())));
}

TEST_CASE("elementwise kernels match scalar reference (f32)") {
  run_elementwise_equivalence<float>(1e-6);
}

TEST_CASE("elementwise kernels match scalar reference (f64)") {
  run_elementwise_equivalence<double>(1e-14);
}

TEST_CASE("matmul kernels match scalar reference (f32)") { run_matmul_equivalence<float>(2e-5); }

TEST_CASE("matmul kernels match scalar reference (f64)") {
  run_matmul_equivalence<double>(1e-13);
}

TEST_CASE("matmul identity and hand oracle") {
  const auto& K = kern::active<double>();
  // [[1,2],[3,4]] * [[5],[6]] = [[17],[39]]
  const double a[4] = {1, 2, 3, 4};
  const double b[2] = {5, 6};
  double c[2] = {0, 0};
  K.matmul_nn(a, b, c, 2, 2, 1);
  CHECK(c[0] == doctest::Approx(17).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(39).epsilon(1e-12));
}

TEST_CASE("reduce_max ties go to the first index") {
  const auto& K = kern::active<float>();
  const float x[9] = {1, 3, 3, 2, 3, 0, 3, 1, 3};
  std::size_t arg = 99;
  const float m = K.reduce_max(x, 9, &arg);
  CHECK(m == 3.f);
  CHECK(arg == 1);
}

TEST_CASE("all_finite detects NaN and inf anywhere") {
  const auto& K = kern::active<double>();
  for (std::size_t n : {1u, 5u, 8u, 9u, 33u}) {
    std::vector<double> v(n, 0.5);
    CHECK(K.all_finite(v.data(), n));
    for (std::size_t bad = 0; bad < n; ++bad) {
      auto w = v;
      w[bad] = std::nan("");
      CHECK_FALSE(K.all_finite(w.data(), n));
      w[bad] = std::numeric_limits<double>::infinity();
      CHECK_FALSE(K.all_finite(w.data(), n));
    }
  }
}
