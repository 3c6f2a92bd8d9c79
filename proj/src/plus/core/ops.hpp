#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "plus/core/tape.hpp"
#include "plus/core/tensor.hpp"
#include "plus/kernels/kernels.hpp"

// Differentiable primitives. Each op computes its value through the kernel
// table, verifies the result is finite, and (when a tape is active and some
// input lies on a grad path) records a backward closure. Backward closures
// compute raw values only; they never record, so there is no higher-order
// differentiation.
//
// Broadcasting is deliberately restricted to scalar-vs-tensor (numel 1 on
// one side). All other shape mixing must go through reshape/concat/slice.

namespace plus::ops {

template <typename T>
void check_finite(const char* op, const Tensor<T>& t) {
  if (!kern::active<T>().all_finite(t.ptr(), t.numel())) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

namespace detail {

template <typename T>
Tensor<T> raw(Shape shape) {
  return Tensor<T>::zeros(std::move(shape));
}

// Decomposition of an axis reduction: [outer, axis, inner] strides.
struct AxisSplit {
  std::int64_t outer, axis, inner;
};

inline AxisSplit split_axis(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit sp{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

inline Shape drop_axis(const Shape& s, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary (same shape, or scalar on either side)

enum class Bin { add, sub, mul, div };

// gy * other, honoring scalar broadcast
template <typename T>
Tensor<T> binary_mul_grad(const Tensor<T>& gy, const Tensor<T>& other) {
  const auto& K = kern::active<T>();
  auto g = detail::raw<T>(gy.shape());
  if (other.numel() == 1) {
    K.scale(gy.ptr(), other.data()[0], g.ptr_mut(), g.numel());
  } else {
    K.mul(gy.ptr(), other.ptr(), g.ptr_mut(), g.numel());
  }
  return g;
}

template <typename T>
Tensor<T> binary_div_grad_a(const Tensor<T>& gy, const Tensor<T>& b) {
  const auto& K = kern::active<T>();
  auto g = detail::raw<T>(gy.shape());
  if (b.numel() == 1) {
    K.scale(gy.ptr(), T(1) / b.data()[0], g.ptr_mut(), g.numel());
  } else {
    K.div(gy.ptr(), b.ptr(), g.ptr_mut(), g.numel());
  }
  return g;
}

template <typename T>
Tensor<T> binary_div_grad_b(const Tensor<T>& gy, const Tensor<T>& a, const Tensor<T>& b) {
  // d(a/b)/db = -a / b^2
  auto g = detail::raw<T>(gy.shape());
  auto* gp = g.ptr_mut();
  const auto* gyp = gy.ptr();
  const auto n = gy.numel();
  const auto* ap = a.ptr();
  const auto* bp = b.ptr();
  const bool sa = a.numel() == 1, sb = b.numel() == 1;
  for (std::int64_t i = 0; i < n; ++i) {
    const T av = sa ? ap[0] : ap[i];
    const T bv = sb ? bp[0] : bp[i];
    gp[i] = -gyp[i] * av / (bv * bv);
  }
  return g;
}

template <typename T>
Tensor<T> binary(Bin kind, const Tensor<T>& a, const Tensor<T>& b, const char* name) {
  const auto& K = kern::active<T>();
  const bool sa = a.numel() == 1, sb = b.numel() == 1;
  Tensor<T> out;
  if (a.shape() == b.shape() || (sa && sb)) {
    out = detail::raw<T>(a.shape());
    switch (kind) {
      case Bin::add: K.add(a.ptr(), b.ptr(), out.ptr_mut(), out.numel()); break;
      case Bin::sub: K.sub(a.ptr(), b.ptr(), out.ptr_mut(), out.numel()); break;
      case Bin::mul: K.mul(a.ptr(), b.ptr(), out.ptr_mut(), out.numel()); break;
      case Bin::div: K.div(a.ptr(), b.ptr(), out.ptr_mut(), out.numel()); break;
    }
  } else if (sb) {
    const T s = b.data()[0];
    out = detail::raw<T>(a.shape());
    auto* y = out.ptr_mut();
    const auto* x = a.ptr();
    const auto n = out.numel();
    switch (kind) {
      case Bin::add:
        for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] + s;
        break;
      case Bin::sub:
        for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] - s;
        break;
      case Bin::mul: K.scale(x, s, y, n); break;
      case Bin::div: K.scale(x, T(1) / s, y, n); break;
    }
  } else if (sa) {
    const T s = a.data()[0];
    out = detail::raw<T>(b.shape());
    auto* y = out.ptr_mut();
    const auto* x = b.ptr();
    const auto n = out.numel();
    switch (kind) {
      case Bin::add:
        for (std::int64_t i = 0; i < n; ++i) y[i] = s + x[i];
        break;
      case Bin::sub:
        for (std::int64_t i = 0; i < n; ++i) y[i] = s - x[i];
        break;
      case Bin::mul: K.scale(x, s, y, n); break;
      case Bin::div:
        for (std::int64_t i = 0; i < n; ++i) y[i] = s / x[i];
        break;
    }
  } else {
    throw ShapeError(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " do not match");
  }
  check_finite(name, out);

  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ia = tp->node_of(a);
    const auto ib = tp->node_of(b);
    if (ia >= 0 || ib >= 0) {
      Tensor<T> sa_t = a, sb_t = b;
      tp->add_node(name,
                   [kind, ia, ib, sa_t, sb_t](Tape<T>& t, const Tensor<T>& gy) {
                     const auto& K = kern::active<T>();
                     auto reduce_or_pass = [&](const Tensor<T>& src, Tensor<T> g) {
                       // gradient of a broadcast scalar is the sum over gy terms
                       if (src.numel() == 1 && g.numel() != 1) {
                         return Tensor<T>::scalar(K.reduce_sum(g.ptr(), g.numel()));
                       }
                       return g;
                     };
                     if (kind == Bin::add) {
                       if (ia >= 0) t.accumulate(ia, reduce_or_pass(sa_t, gy));
                       if (ib >= 0) t.accumulate(ib, reduce_or_pass(sb_t, gy));
                     } else if (kind == Bin::sub) {
                       if (ia >= 0) t.accumulate(ia, reduce_or_pass(sa_t, gy));
                       if (ib >= 0) {
                         auto g = detail::raw<T>(gy.shape());
                         K.scale(gy.ptr(), T(-1), g.ptr_mut(), g.numel());
                         t.accumulate(ib, reduce_or_pass(sb_t, g));
                       }
                     } else if (kind == Bin::mul) {
                       if (ia >= 0) {
                         auto g = binary_mul_grad(gy, sb_t);
                         t.accumulate(ia, reduce_or_pass(sa_t, g));
                       }
                       if (ib >= 0) {
                         auto g = binary_mul_grad(gy, sa_t);
                         t.accumulate(ib, reduce_or_pass(sb_t, g));
                       }
                     } else {  // div: y = a / b
                       if (ia >= 0) {
                         auto g = binary_div_grad_a(gy, sb_t);
                         t.accumulate(ia, reduce_or_pass(sa_t, g));
                       }
                       if (ib >= 0) {
                         auto g = binary_div_grad_b(gy, sa_t, sb_t);
                         t.accumulate(ib, reduce_or_pass(sb_t, g));
                       }
                     }
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Bin::add, a, b, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Bin::sub, a, b, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Bin::mul, a, b, "mul");
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(Bin::div, a, b, "div");
}

// ---------------------------------------------------------------------------
// constant-attribute elementwise

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double alpha) {
  const auto& K = kern::active<T>();
  auto out = detail::raw<T>(x.shape());
  K.scale(x.ptr(), static_cast<T>(alpha), out.ptr_mut(), out.numel());
  check_finite("scale", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      tp->add_node("scale",
                   [ix, alpha](Tape<T>& t, const Tensor<T>& gy) {
                     auto g = detail::raw<T>(gy.shape());
                     kern::active<T>().scale(gy.ptr(), static_cast<T>(alpha), g.ptr_mut(),
                                             g.numel());
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& x, double c) {
  auto out = detail::raw<T>(x.shape());
  auto* y = out.ptr_mut();
  const auto* xp = x.ptr();
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = xp[i] + static_cast<T>(c);
  check_finite("add_const", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      tp->add_node("add_const",
                   [ix](Tape<T>& t, const Tensor<T>& gy) { t.accumulate(ix, gy); }, out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise unary

template <typename T, class Fwd, class MakeBackward>
Tensor<T> unary(const char* name, const Tensor<T>& x, Fwd&& fwd, MakeBackward&& make_bwd) {
  auto out = detail::raw<T>(x.shape());
  fwd(x.ptr(), out.ptr_mut(), x.numel());
  check_finite(name, out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) tp->add_node(name, make_bwd(ix, x, out), out);
  }
  return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      "exp", x,
      [](const T* xp, T* y, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) y[i] = std::exp(xp[i]);
      },
      [](std::int64_t ix, const Tensor<T>&, const Tensor<T>& y) {
        return [ix, y](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          kern::active<T>().mul(gy.ptr(), y.ptr(), g.ptr_mut(), g.numel());
          t.accumulate(ix, g);
        };
      });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>(
      "log", x,
      [](const T* xp, T* y, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) y[i] = std::log(xp[i]);
      },
      [](std::int64_t ix, const Tensor<T>& x0, const Tensor<T>&) {
        return [ix, x0](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          kern::active<T>().div(gy.ptr(), x0.ptr(), g.ptr_mut(), g.numel());
          t.accumulate(ix, g);
        };
      });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary<T>(
      "sqrt", x,
      [](const T* xp, T* y, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) y[i] = std::sqrt(xp[i]);
      },
      [](std::int64_t ix, const Tensor<T>&, const Tensor<T>& y) {
        return [ix, y](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          const auto* yp = y.ptr();
          const auto* gyp = gy.ptr();
          auto* gp = g.ptr_mut();
          for (std::int64_t i = 0; i < g.numel(); ++i) gp[i] = gyp[i] / (T(2) * yp[i]);
          t.accumulate(ix, g);
        };
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x,
      [](const T* xp, T* y, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) y[i] = xp[i] > T(0) ? xp[i] : T(0);
      },
      [](std::int64_t ix, const Tensor<T>& x0, const Tensor<T>&) {
        return [ix, x0](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          const auto* xp = x0.ptr();
          const auto* gyp = gy.ptr();
          auto* gp = g.ptr_mut();
          for (std::int64_t i = 0; i < g.numel(); ++i) gp[i] = xp[i] > T(0) ? gyp[i] : T(0);
          t.accumulate(ix, g);
        };
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](const T* xp, T* y, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) {
          const T v = xp[i];
          y[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                           : std::exp(v) / (T(1) + std::exp(v));
        }
      },
      [](std::int64_t ix, const Tensor<T>&, const Tensor<T>& y) {
        return [ix, y](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          const auto* yp = y.ptr();
          const auto* gyp = gy.ptr();
          auto* gp = g.ptr_mut();
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gp[i] = gyp[i] * yp[i] * (T(1) - yp[i]);
          t.accumulate(ix, g);
        };
      });
}

// y = x^p with constant exponent; pow(x, 0) == 1 with zero gradient
template <typename T>
Tensor<T> pow_const(const Tensor<T>& x, double p) {
  return unary<T>(
      "pow_const", x,
      [p](const T* xp, T* y, std::int64_t n) {
        if (p == 0.0) {
          for (std::int64_t i = 0; i < n; ++i) y[i] = T(1);
        } else if (p == 1.0) {
          for (std::int64_t i = 0; i < n; ++i) y[i] = xp[i];
        } else if (p == 2.0) {
          for (std::int64_t i = 0; i < n; ++i) y[i] = xp[i] * xp[i];
        } else {
          for (std::int64_t i = 0; i < n; ++i) y[i] = std::pow(xp[i], static_cast<T>(p));
        }
      },
      [p](std::int64_t ix, const Tensor<T>& x0, const Tensor<T>&) {
        return [ix, x0, p](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          const auto* xp = x0.ptr();
          const auto* gyp = gy.ptr();
          auto* gp = g.ptr_mut();
          const auto n = g.numel();
          if (p == 0.0) {
            std::memset(gp, 0, n * sizeof(T));
          } else if (p == 1.0) {
            std::memcpy(gp, gyp, n * sizeof(T));
          } else if (p == 2.0) {
            for (std::int64_t i = 0; i < n; ++i) gp[i] = gyp[i] * T(2) * xp[i];
          } else {
            for (std::int64_t i = 0; i < n; ++i)
              gp[i] = gyp[i] * static_cast<T>(p) * std::pow(xp[i], static_cast<T>(p - 1.0));
          }
          t.accumulate(ix, g);
        };
      });
}

// pass-through gradient strictly inside (lo, hi), zero on the clamped ends
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, double lo, double hi) {
  return unary<T>(
      "clamp", x,
      [lo, hi](const T* xp, T* y, std::int64_t n) {
        const T l = static_cast<T>(lo), h = static_cast<T>(hi);
        for (std::int64_t i = 0; i < n; ++i) y[i] = xp[i] < l ? l : (xp[i] > h ? h : xp[i]);
      },
      [lo, hi](std::int64_t ix, const Tensor<T>& x0, const Tensor<T>&) {
        return [ix, x0, lo, hi](Tape<T>& t, const Tensor<T>& gy) {
          auto g = detail::raw<T>(gy.shape());
          const T l = static_cast<T>(lo), h = static_cast<T>(hi);
          const auto* xp = x0.ptr();
          const auto* gyp = gy.ptr();
          auto* gp = g.ptr_mut();
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gp[i] = (xp[i] > l && xp[i] < h) ? gyp[i] : T(0);
          t.accumulate(ix, g);
        };
      });
}

// ---------------------------------------------------------------------------
// softmax along an axis (max-subtracted)

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  auto out = detail::raw<T>(x.shape());
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.axis * sp.inner + in;
      T mx = xp[base];
      for (std::int64_t a = 1; a < sp.axis; ++a)
        mx = std::max(mx, xp[base + a * sp.inner]);
      T sum = 0;
      for (std::int64_t a = 0; a < sp.axis; ++a) {
        const T e = std::exp(xp[base + a * sp.inner] - mx);
        yp[base + a * sp.inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (std::int64_t a = 0; a < sp.axis; ++a) yp[base + a * sp.inner] *= inv;
    }
  }
  check_finite("softmax", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Tensor<T> y = out;
      tp->add_node("softmax",
                   [ix, y, sp](Tape<T>& t, const Tensor<T>& gy) {
                     // gx = y * (gy - sum_axis(gy * y))
                     auto g = detail::raw<T>(gy.shape());
                     const auto* yp = y.ptr();
                     const auto* gyp = gy.ptr();
                     auto* gp = g.ptr_mut();
                     for (std::int64_t o = 0; o < sp.outer; ++o) {
                       for (std::int64_t in = 0; in < sp.inner; ++in) {
                         const std::int64_t base = o * sp.axis * sp.inner + in;
                         T dot = 0;
                         for (std::int64_t a = 0; a < sp.axis; ++a) {
                           const auto k = base + a * sp.inner;
                           dot += gyp[k] * yp[k];
                         }
                         for (std::int64_t a = 0; a < sp.axis; ++a) {
                           const auto k = base + a * sp.inner;
                           gp[k] = yp[k] * (gyp[k] - dot);
                         }
                       }
                     }
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul / transpose (2-D)

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = detail::raw<T>({m, n});
  kern::active<T>().matmul_nn(a.ptr(), b.ptr(), out.ptr_mut(), m, k, n);
  check_finite("matmul", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ia = tp->node_of(a);
    const auto ib = tp->node_of(b);
    if (ia >= 0 || ib >= 0) {
      Tensor<T> sa = a, sb = b;
      tp->add_node("matmul",
                   [ia, ib, sa, sb, m, k, n](Tape<T>& t, const Tensor<T>& gy) {
                     const auto& K = kern::active<T>();
                     if (ia >= 0) {
                       auto ga = detail::raw<T>({m, k});
                       K.matmul_nt(gy.ptr(), sb.ptr(), ga.ptr_mut(), m, n, k);
                       t.accumulate(ia, ga);
                     }
                     if (ib >= 0) {
                       auto gb = detail::raw<T>({k, n});
                       K.matmul_tn(sa.ptr(), gy.ptr(), gb.ptr_mut(), k, m, n);
                       t.accumulate(ib, gb);
                     }
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.ndim() != 2) throw ShapeError("transpose expects 2-D, got " + shape_str(x.shape()));
  const auto m = x.dim(0), n = x.dim(1);
  auto out = detail::raw<T>({n, m});
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) yp[j * m + i] = xp[i * n + j];
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      tp->add_node("transpose",
                   [ix, m, n](Tape<T>& t, const Tensor<T>& gy) {
                     auto g = detail::raw<T>({m, n});
                     const auto* gp_in = gy.ptr();
                     auto* gp = g.ptr_mut();
                     for (std::int64_t j = 0; j < n; ++j)
                       for (std::int64_t i = 0; i < m; ++i) gp[i * n + j] = gp_in[j * m + i];
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  auto out = detail::raw<T>(shape);
  std::memcpy(out.ptr_mut(), x.ptr(), x.numel() * sizeof(T));
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node("reshape",
                   [ix, in_shape](Tape<T>& t, const Tensor<T>& gy) {
                     t.accumulate(ix, gy.view_as(in_shape));
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const auto& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size()))
    throw ShapeError("concat axis out of range");
  Shape out_shape = s0;
  std::int64_t total_axis = 0;
  for (const auto& p : parts) {
    if (p.ndim() != s0.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t i = 0; i < s0.size(); ++i) {
      if (static_cast<int>(i) != axis && p.shape()[i] != s0[i]) {
        throw ShapeError("concat: off-axis extents differ: " + shape_str(p.shape()) + " vs " +
                         shape_str(s0));
      }
    }
    total_axis += p.shape()[axis];
  }
  out_shape[axis] = total_axis;
  auto out = detail::raw<T>(out_shape);
  const auto sp = detail::split_axis(out_shape, axis);
  auto* yp = out.ptr_mut();
  std::int64_t axis_off = 0;
  for (const auto& p : parts) {
    const auto pa = p.shape()[axis];
    const auto* xp = p.ptr();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::memcpy(yp + (o * sp.axis + axis_off) * sp.inner, xp + o * pa * sp.inner,
                  pa * sp.inner * sizeof(T));
    }
    axis_off += pa;
  }

  auto* tp = Tape<T>::active();
  if (tp) {
    std::vector<std::int64_t> ids(parts.size(), -1);
    bool any = false;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      ids[i] = tp->node_of(parts[i]);
      any = any || ids[i] >= 0;
    }
    if (any) {
      std::vector<Shape> part_shapes;
      for (const auto& p : parts) part_shapes.push_back(p.shape());
      tp->add_node("concat",
                   [ids, part_shapes, axis, sp](Tape<T>& t, const Tensor<T>& gy) {
                     const auto* gp = gy.ptr();
                     std::int64_t axis_off = 0;
                     for (std::size_t i = 0; i < ids.size(); ++i) {
                       const auto pa = part_shapes[i][axis];
                       if (ids[i] >= 0) {
                         auto g = detail::raw<T>(part_shapes[i]);
                         auto* dst = g.ptr_mut();
                         for (std::int64_t o = 0; o < sp.outer; ++o) {
                           std::memcpy(dst + o * pa * sp.inner,
                                       gp + (o * sp.axis + axis_off) * sp.inner,
                                       pa * sp.inner * sizeof(T));
                         }
                         t.accumulate(ids[i], g);
                       }
                       axis_off += pa;
                     }
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t len) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (start < 0 || len < 1 || start + len > sp.axis) {
    throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of range for axis " + std::to_string(axis) + " of " +
                     shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  auto out = detail::raw<T>(out_shape);
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    std::memcpy(yp + o * len * sp.inner, xp + (o * sp.axis + start) * sp.inner,
                len * sp.inner * sizeof(T));
  }
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node("slice",
                   [ix, in_shape, sp, start, len](Tape<T>& t, const Tensor<T>& gy) {
                     auto g = Tensor<T>::zeros(in_shape);
                     auto* gp = g.ptr_mut();
                     const auto* gyp = gy.ptr();
                     for (std::int64_t o = 0; o < sp.outer; ++o) {
                       std::memcpy(gp + (o * sp.axis + start) * sp.inner,
                                   gyp + o * len * sp.inner, len * sp.inner * sizeof(T));
                     }
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

enum class Red { sum, mean, max };

template <typename T>
Tensor<T> reduce_axis(Red kind, const Tensor<T>& x, int axis, const char* name) {
  const auto sp = detail::split_axis(x.shape(), axis);
  auto out = detail::raw<T>(detail::drop_axis(x.shape(), axis));
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  // winning axis position per output slot (max only)
  std::vector<std::int64_t> arg;
  if (kind == Red::max) arg.resize(sp.outer * sp.inner);
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.axis * sp.inner + in;
      if (kind == Red::max) {
        T best = xp[base];
        std::int64_t bi = 0;
        for (std::int64_t a = 1; a < sp.axis; ++a) {
          const T v = xp[base + a * sp.inner];
          if (v > best) {
            best = v;
            bi = a;
          }
        }
        yp[o * sp.inner + in] = best;
        arg[o * sp.inner + in] = bi;
      } else {
        T acc = 0;
        for (std::int64_t a = 0; a < sp.axis; ++a) acc += xp[base + a * sp.inner];
        yp[o * sp.inner + in] = kind == Red::mean ? acc / T(sp.axis) : acc;
      }
    }
  }
  check_finite(name, out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node(name,
                   [kind, ix, in_shape, sp, arg](Tape<T>& t, const Tensor<T>& gy) {
                     auto g = Tensor<T>::zeros(in_shape);
                     auto* gp = g.ptr_mut();
                     const auto* gyp = gy.ptr();
                     for (std::int64_t o = 0; o < sp.outer; ++o) {
                       for (std::int64_t in = 0; in < sp.inner; ++in) {
                         const auto gv = gyp[o * sp.inner + in];
                         const std::int64_t base = o * sp.axis * sp.inner + in;
                         if (kind == Red::max) {
                           gp[base + arg[o * sp.inner + in] * sp.inner] = gv;
                         } else if (kind == Red::mean) {
                           const T v = gv / T(sp.axis);
                           for (std::int64_t a = 0; a < sp.axis; ++a)
                             gp[base + a * sp.inner] = v;
                         } else {
                           for (std::int64_t a = 0; a < sp.axis; ++a)
                             gp[base + a * sp.inner] = gv;
                         }
                       }
                     }
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, int axis) {
  return reduce_axis(Red::sum, x, axis, "reduce_sum");
}
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, int axis) {
  return reduce_axis(Red::mean, x, axis, "reduce_mean");
}
template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, int axis) {
  return reduce_axis(Red::max, x, axis, "reduce_max");
}

template <typename T>
Tensor<T> reduce_sum_all(const Tensor<T>& x) {
  auto out = Tensor<T>::scalar(kern::active<T>().reduce_sum(x.ptr(), x.numel()));
  check_finite("reduce_sum_all", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node("reduce_sum_all",
                   [ix, in_shape](Tape<T>& t, const Tensor<T>& gy) {
                     t.accumulate(ix, Tensor<T>::full(in_shape, gy.data()[0]));
                   },
                   out);
    }
  }
  return out;
}

template <typename T>
Tensor<T> reduce_mean_all(const Tensor<T>& x) {
  const T inv = T(1) / T(x.numel());
  auto out = Tensor<T>::scalar(kern::active<T>().reduce_sum(x.ptr(), x.numel()) * inv);
  check_finite("reduce_mean_all", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node("reduce_mean_all",
                   [ix, in_shape, inv](Tape<T>& t, const Tensor<T>& gy) {
                     t.accumulate(ix, Tensor<T>::full(in_shape, gy.data()[0] * inv));
                   },
                   out);
    }
  }
  return out;
}

// max over all entries; gradient routed to the first maximal flat index
template <typename T>
Tensor<T> reduce_max_all(const Tensor<T>& x) {
  std::size_t arg = 0;
  auto out = Tensor<T>::scalar(kern::active<T>().reduce_max(x.ptr(), x.numel(), &arg));
  check_finite("reduce_max_all", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      Shape in_shape = x.shape();
      tp->add_node("reduce_max_all",
                   [ix, in_shape, arg](Tape<T>& t, const Tensor<T>& gy) {
                     auto g = Tensor<T>::zeros(in_shape);
                     g.ptr_mut()[arg] = gy.data()[0];
                     t.accumulate(ix, g);
                   },
                   out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// row-vector bias add: y[i,j] = x[i,j] + v[j]

template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.ndim() != 2 || v.ndim() != 1 || v.dim(0) != x.dim(1)) {
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
  }
  const auto m = x.dim(0), n = x.dim(1);
  auto out = detail::raw<T>(x.shape());
  const auto& K = kern::active<T>();
  for (std::int64_t i = 0; i < m; ++i) {
    K.add(x.ptr() + i * n, v.ptr(), out.ptr_mut() + i * n, n);
  }
  check_finite("add_rowvec", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    const auto iv = tp->node_of(v);
    if (ix >= 0 || iv >= 0) {
      tp->add_node("add_rowvec",
                   [ix, iv, m, n](Tape<T>& t, const Tensor<T>& gy) {
                     if (ix >= 0) t.accumulate(ix, gy);
                     if (iv >= 0) {
                       auto gv = Tensor<T>::zeros({n});
                       const auto& K = kern::active<T>();
                       for (std::int64_t i = 0; i < m; ++i)
                         K.axpy(T(1), gy.ptr() + i * n, gv.ptr_mut(), n);
                       t.accumulate(iv, gv);
                     }
                   },
                   out);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// per-row layer normalization with learnable gamma/beta

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5) {
  if (x.ndim() != 2 || gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != x.dim(1) ||
      beta.dim(0) != x.dim(1)) {
    throw ShapeError("layer_norm: x " + shape_str(x.shape()) + ", gamma " +
                     shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
  }
  const auto m = x.dim(0), n = x.dim(1);
  auto out = detail::raw<T>(x.shape());
  auto xhat = detail::raw<T>(x.shape());
  std::vector<T> rstd(m);
  const auto* xp = x.ptr();
  auto* hp = xhat.ptr_mut();
  auto* yp = out.ptr_mut();
  const auto* gp = gamma.ptr();
  const auto* bp = beta.ptr();
  for (std::int64_t i = 0; i < m; ++i) {
    const auto* row = xp + i * n;
    T mu = 0;
    for (std::int64_t j = 0; j < n; ++j) mu += row[j];
    mu /= T(n);
    T var = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      const T d = row[j] - mu;
      var += d * d;
    }
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    rstd[i] = rs;
    for (std::int64_t j = 0; j < n; ++j) {
      const T h = (row[j] - mu) * rs;
      hp[i * n + j] = h;
      yp[i * n + j] = gp[j] * h + bp[j];
    }
  }
  check_finite("layer_norm", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    const auto ig = tp->node_of(gamma);
    const auto ib = tp->node_of(beta);
    if (ix >= 0 || ig >= 0 || ib >= 0) {
      Tensor<T> sg = gamma;
      tp->add_node(
          "layer_norm",
          [ix, ig, ib, xhat, sg, rstd, m, n](Tape<T>& t, const Tensor<T>& gy) {
            const auto* gyp = gy.ptr();
            const auto* hp = xhat.ptr();
            const auto* gp = sg.ptr();
            if (ix >= 0) {
              auto gx = detail::raw<T>({m, n});
              auto* gxp = gx.ptr_mut();
              for (std::int64_t i = 0; i < m; ++i) {
                T s1 = 0, s2 = 0;
                for (std::int64_t j = 0; j < n; ++j) {
                  const T gh = gyp[i * n + j] * gp[j];
                  s1 += gh;
                  s2 += gh * hp[i * n + j];
                }
                s1 /= T(n);
                s2 /= T(n);
                for (std::int64_t j = 0; j < n; ++j) {
                  const T gh = gyp[i * n + j] * gp[j];
                  gxp[i * n + j] = rstd[i] * (gh - s1 - hp[i * n + j] * s2);
                }
              }
              t.accumulate(ix, gx);
            }
            if (ig >= 0) {
              auto gg = Tensor<T>::zeros({n});
              auto* ggp = gg.ptr_mut();
              for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) ggp[j] += gyp[i * n + j] * hp[i * n + j];
              t.accumulate(ig, gg);
            }
            if (ib >= 0) {
              auto gb = Tensor<T>::zeros({n});
              auto* gbp = gb.ptr_mut();
              for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) gbp[j] += gyp[i * n + j];
              t.accumulate(ib, gb);
            }
          },
          out);
    }
  }
  return out;
}

}  // namespace plus::ops
