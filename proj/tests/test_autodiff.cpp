// Reverse-mode engine: backward contracts, per-primitive gradients against
// central differences on randomized shapes, linearity, replay determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plus/core/grad_check.hpp"
#include "plus/core/ops.hpp"
#include "plus/core/ops_spatial.hpp"

using namespace plus;
namespace o = plus::ops;
using D = Tensor<double>;
using TapeD = Tape<double>;

namespace {

Shape random_shape(Rng& rng, int max_dims = 4, std::int64_t max_extent = 5) {
  const int nd = 1 + static_cast<int>(rng.below(max_dims));
  Shape s;
  for (int i = 0; i < nd; ++i) s.push_back(1 + static_cast<std::int64_t>(rng.below(max_extent)));
  return s;
}

}  // namespace

TEST_CASE("backward contracts") {
  auto x = D::randn({3}, 1).set_requires_grad(true);
  TapeD tape;
  TapeD::Scope scope(tape);
  auto y = o::mul(x, x);

  // non-scalar loss is rejected
  CHECK_THROWS_AS(tape.backward(y), ContractError);

  auto loss = o::reduce_sum_all(y);
  tape.backward(loss);
  auto g = tape.grad(x);
  for (std::int64_t i = 0; i < 3; ++i)
    CHECK(g.data()[i] == doctest::Approx(2 * x.data()[i]).epsilon(1e-12));

  // a tensor never used in the graph gets a zero gradient
  auto unused = D::randn({2}, 9).set_requires_grad(true);
  auto gz = tape.grad(unused);
  for (auto v : gz.data()) CHECK(v == 0.0);

  // loss from another tape is rejected
  TapeD other;
  CHECK_THROWS_AS(other.backward(loss), ContractError);
}

TEST_CASE("grad of sum is all ones; constant has zero gradient") {
  auto x = D::randn({2, 3, 2}, 2).set_requires_grad(true);
  {
    TapeD tape;
    TapeD::Scope scope(tape);
    auto loss = o::reduce_sum_all(x);
    tape.backward(loss);
    for (auto v : tape.grad(x).data()) CHECK(v == 1.0);
  }
  // requires_grad=false tensors never receive gradients
  auto c = D::randn({2}, 3);
  auto w = D::randn({2}, 4).set_requires_grad(true);
  {
    TapeD tape;
    TapeD::Scope scope(tape);
    auto loss = o::reduce_sum_all(o::mul(c, o::mul(w, c)));
    tape.backward(loss);
    auto g = tape.grad(c);
    for (auto v : g.data()) CHECK(v == 0.0);
    // an all-constant graph yields a detached loss
    auto detached = o::reduce_sum_all(o::mul(c, c));
    CHECK_THROWS_AS(tape.backward(detached), ContractError);
  }
}

TEST_CASE("grad at x=[3] of sum(x*x) is [6]") {
  auto x = D({1}, {3.0}).set_requires_grad(true);
  TapeD tape;
  TapeD::Scope scope(tape);
  auto loss = o::reduce_sum_all(o::mul(x, x));
  tape.backward(loss);
  CHECK(tape.grad(x).item() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("grad_check of sum-of-squares and constants") {
  std::vector<D> params{D::randn({3, 2}, 5).set_requires_grad(true)};
  auto fn = [](const std::vector<D>& ps) {
    return o::reduce_sum_all(o::mul(ps[0], ps[0]));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-7);

  // constant function: analytic grad 0, error 0
  std::vector<D> params2{D::randn({2}, 6).set_requires_grad(true)};
  auto fc = [](const std::vector<D>& ps) {
    return o::reduce_sum_all(o::mul(ps[0], D::zeros(ps[0].shape())));
  };
  CHECK(grad_check<double>(fc, params2, 1e-5) == 0.0);
}

TEST_CASE("softmax-log-pick composite matches central differences") {
  auto x = D::randn({5}, 17).set_requires_grad(true);
  auto onehot = D({5}, {0, 0, 1, 0, 0});
  std::vector<D> params{x};
  auto fn = [&onehot](const std::vector<D>& ps) {
    auto p = o::softmax(ps[0], 0);
    return o::reduce_sum_all(o::mul(o::log(p), onehot));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-6);
}

TEST_CASE("every primitive matches central differences on randomized shapes") {
  Rng rng(99);
  const double tol = 1e-6;
  for (int rep = 0; rep < 8; ++rep) {
    const auto shape = random_shape(rng);
    auto a = D::randn(shape, 100 + rep).set_requires_grad(true);
    auto b0 = D::uniform(shape, 200 + rep, 0.5, 1.5).set_requires_grad(true);

    using Fn = std::function<D(const std::vector<D>&)>;
    std::vector<std::pair<const char*, Fn>> cases;
    cases.emplace_back("add", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::mul(o::add(p[0], p[1]), p[1]));
    });
    cases.emplace_back("sub", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::mul(o::sub(p[0], p[1]), p[0]));
    });
    cases.emplace_back("mul", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::mul(p[0], p[1]));
    });
    cases.emplace_back("div", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::div(p[0], p[1]));
    });
    cases.emplace_back("scale", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::scale(o::mul(p[0], p[1]), -1.7));
    });
    cases.emplace_back("exp", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::exp(o::scale(p[0], 0.3)));
    });
    cases.emplace_back("log", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::log(p[1]));
    });
    cases.emplace_back("sqrt", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::sqrt(p[1]));
    });
    cases.emplace_back("sigmoid", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::sigmoid(p[0]));
    });
    cases.emplace_back("pow2.5", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::pow_const(p[1], 2.5));
    });
    cases.emplace_back("relu", [](const std::vector<D>& p) {
      // shift away from the kink so central differences are valid
      return o::reduce_sum_all(o::relu(o::add_const(p[0], 3.0)));
    });
    cases.emplace_back("clamp", [](const std::vector<D>& p) {
      return o::reduce_sum_all(o::clamp(p[1], 0.05, 0.9));
    });
    cases.emplace_back("reshape", [&shape](const std::vector<D>& p) {
      return o::reduce_sum_all(o::mul(o::reshape(p[0], {numel_of(shape)}),
                                      o::reshape(p[1], {numel_of(shape)})));
    });
    const int axis = static_cast<int>(rng.below(shape.size()));
    cases.emplace_back("softmax", [axis](const std::vector<D>& p) {
      return o::reduce_sum_all(o::mul(o::softmax(p[0], axis), p[1]));
    });
    cases.emplace_back("reduce_sum_axis", [axis](const std::vector<D>& p) {
      auto r = o::reduce_sum(p[0], axis);
      return o::reduce_sum_all(o::mul(r, r));
    });
    cases.emplace_back("reduce_mean_axis", [axis](const std::vector<D>& p) {
      auto r = o::reduce_mean(p[0], axis);
      return o::reduce_sum_all(o::mul(r, r));
    });
    cases.emplace_back("reduce_max_axis", [axis](const std::vector<D>& p) {
      return o::reduce_sum_all(o::reduce_max(p[0], axis));
    });
    cases.emplace_back("reduce_max_all", [](const std::vector<D>& p) {
      return o::reduce_max_all(p[0]);
    });
    cases.emplace_back("concat_slice", [axis](const std::vector<D>& p) {
      auto c = o::concat<double>({p[0], p[1]}, axis);
      auto s = o::slice(c, axis, 1, c.shape()[axis] - 1);
      return o::reduce_sum_all(o::mul(s, s));
    });

    for (auto& [name, fn] : cases) {
      std::vector<D> params{a, b0};
      const double err = grad_check<double>(fn, params, 1e-5);
      INFO(name << " on shape " << shape_str(shape));
      CHECK(err <= tol);
    }
  }
}

TEST_CASE("matmul and transpose gradients") {
  auto a = D::randn({3, 4}, 11).set_requires_grad(true);
  auto b = D::randn({4, 2}, 12).set_requires_grad(true);
  std::vector<D> params{a, b};
  auto fn = [](const std::vector<D>& p) {
    auto c = o::matmul(p[0], p[1]);
    auto ct = o::transpose(c);
    return o::reduce_sum_all(o::mul(ct, ct));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-6);
}

TEST_CASE("add_rowvec and layer_norm gradients") {
  auto x = D::randn({4, 6}, 13).set_requires_grad(true);
  auto v = D::randn({6}, 14).set_requires_grad(true);
  auto g = D::uniform({6}, 15, 0.5, 1.5).set_requires_grad(true);
  auto b = D::randn({6}, 16).set_requires_grad(true);
  std::vector<D> params{x, v, g, b};
  auto fn = [](const std::vector<D>& p) {
    auto y = o::add_rowvec(p[0], p[1]);
    auto n = o::layer_norm(y, p[2], p[3]);
    return o::reduce_sum_all(o::mul(n, n));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-6);
}

TEST_CASE("conv3d / pool / crop gradients") {
  auto x = D::randn({2, 4, 4, 4}, 21).set_requires_grad(true);
  auto w = D::randn({2, 2, 3, 3, 3}, 22, 0.0, 0.4).set_requires_grad(true);
  auto b = D::randn({2}, 23, 0.0, 0.4).set_requires_grad(true);
  std::vector<D> params{x, w, b};
  auto fn = [](const std::vector<D>& p) {
    auto y = o::conv3d(p[0], p[1], p[2], 2, 1);
    auto pl = o::adaptive_mean_pool3d(y, {2, 1, 2});
    auto cr = o::crop3d(pl, {0, 0, -1}, {2, 1, 2});
    return o::reduce_sum_all(o::mul(cr, cr));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-6);
}

TEST_CASE("backward is linear in the loss") {
  auto x = D::randn({4}, 30).set_requires_grad(true);
  const double ca = 1.7, cb = -0.6;
  auto run = [&](double wa, double wb) {
    TapeD tape;
    TapeD::Scope scope(tape);
    auto f = o::reduce_sum_all(o::mul(x, x));
    auto g = o::reduce_sum_all(o::exp(o::scale(x, 0.5)));
    auto loss = o::add(o::scale(f, wa), o::scale(g, wb));
    tape.backward(loss);
    return tape.grad(x).clone();
  };
  auto gf = run(1, 0);
  auto gg = run(0, 1);
  auto gmix = run(ca, cb);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(gmix.data()[i] ==
          doctest::Approx(ca * gf.data()[i] + cb * gg.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("replay with identical seeds is bit-identical") {
  auto run = [] {
    auto x = D::randn({3, 3}, 77).set_requires_grad(true);
    TapeD tape;
    TapeD::Scope scope(tape);
    auto y = o::softmax(o::matmul(x, x), 1);
    auto loss = o::reduce_sum_all(o::mul(y, y));
    tape.backward(loss);
    return std::pair{loss.item(), tape.grad(x).clone()};
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  CHECK(l1 == l2);
  for (std::int64_t i = 0; i < g1.numel(); ++i) CHECK(g1.data()[i] == g2.data()[i]);
}

TEST_CASE("gradients accumulate across fan-out") {
  auto x = D::randn({3}, 41).set_requires_grad(true);
  TapeD tape;
  TapeD::Scope scope(tape);
  auto y = o::add(o::mul(x, x), o::scale(x, 2.0));  // x^2 + 2x
  tape.backward(o::reduce_sum_all(y));
  auto g = tape.grad(x);
  for (std::int64_t i = 0; i < 3; ++i)
    CHECK(g.data()[i] == doctest::Approx(2 * x.data()[i] + 2).epsilon(1e-12));
}
