#pragma once

#include <functional>

#include "plus/core/ops.hpp"
#include "plus/core/tape.hpp"

namespace plus {

// Central-difference verification of reverse-mode gradients. fn must be a
// deterministic map from the parameter list to a scalar tensor; parameters
// are perturbed in place through their shared buffers. Returns the max over
// all parameter entries of
//   |analytic - cd| / max(|analytic|, |cd|, 1e-12)
// counting differences below atol as zero: central differences of a
// structurally-zero gradient (e.g. an attention key bias, which cancels in
// softmax) are pure rounding noise of order |f| * ulp / eps, and the ratio
// of two noise terms is meaningless.
template <typename T>
double grad_check(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& fn,
                  std::vector<Tensor<T>>& params, double eps = 1e-5, double atol = 1e-9) {
  if (eps <= 0) throw ContractError("grad_check eps must be positive");
  for (auto& p : params) {
    if (!p.requires_grad()) throw ContractError("grad_check parameter without requires_grad");
  }

  std::vector<Tensor<T>> analytic;
  {
    Tape<T> tape;
    typename Tape<T>::Scope scope(tape);
    auto loss = fn(params);
    if (loss.numel() != 1) throw ContractError("grad_check fn must return a scalar");
    if (!kern::active<T>().all_finite(loss.ptr(), 1)) {
      throw NumericError("grad_check fn produced a non-finite value");
    }
    tape.backward(loss);
    for (auto& p : params) analytic.push_back(tape.grad(p).clone());
  }

  const auto eval = [&]() -> double {
    auto v = fn(params);
    const double out = static_cast<double>(v.item());
    if (!std::isfinite(out)) throw NumericError("grad_check fn produced a non-finite value");
    return out;
  };

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto buf = params[pi].data_mut();
    const auto* ga = analytic[pi].ptr();
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const T saved = buf[i];
      buf[i] = saved + static_cast<T>(eps);
      const double fp = eval();
      buf[i] = saved - static_cast<T>(eps);
      const double fm = eval();
      buf[i] = saved;
      const double cd = (fp - fm) / (2.0 * eps);
      const double a = static_cast<double>(ga[i]);
      const double diff = std::abs(a - cd);
      if (diff <= atol) continue;
      const double denom = std::max({std::abs(a), std::abs(cd), 1e-12});
      max_rel = std::max(max_rel, diff / denom);
    }
  }
  return max_rel;
}

}  // namespace plus
