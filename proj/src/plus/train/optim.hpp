#pragma once

#include "plus/core/tape.hpp"
#include "plus/nn/params.hpp"

namespace plus::train {

// AdamW with decoupled weight decay and cosine-annealed learning rate:
//   lr(t) = min_lr + 0.5 (base_lr - min_lr)(1 + cos(pi t / T)).
// Decay is applied directly to the parameters before the moment update.
template <typename T>
class AdamW {
 public:
  struct Config {
    double base_lr = 1e-4;
    double min_lr = 0.0;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t total_steps = 1;
  };

  AdamW(const nn::ParamSet<T>& ps, Config cfg) : cfg_(cfg) {
    if (cfg_.total_steps < 1) throw ConfigError("optimizer needs total_steps >= 1");
    for (const auto& [name, t] : ps.items()) {
      m_.emplace_back(t.numel(), T(0));
      v_.emplace_back(t.numel(), T(0));
    }
  }

  double lr_at(std::int64_t step) const {
    const double frac = static_cast<double>(step) / static_cast<double>(cfg_.total_steps);
    return cfg_.min_lr +
           0.5 * (cfg_.base_lr - cfg_.min_lr) * (1.0 + std::cos(3.14159265358979323846 * frac));
  }

  std::int64_t steps_done() const { return step_; }

  // one update from the gradients recorded on tape (after backward)
  void step(nn::ParamSet<T>& ps, Tape<T>& tape) {
    const double lr = lr_at(step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_ + 1));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_ + 1));
    const auto& K = kern::active<T>();
    std::size_t pi = 0;
    for (auto& [name, p] : ps.items()) {
      auto g = tape.grad(p);
      if (!K.all_finite(g.ptr(), g.numel())) {
        throw NumericError("non-finite gradient for parameter " + name);
      }
      auto* pv = p.ptr_mut();
      const auto* gv = g.ptr();
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        pv[i] -= static_cast<T>(lr * cfg_.weight_decay) * pv[i];
        m[i] = static_cast<T>(cfg_.beta1) * m[i] + static_cast<T>(1.0 - cfg_.beta1) * gv[i];
        v[i] = static_cast<T>(cfg_.beta2) * v[i] +
               static_cast<T>(1.0 - cfg_.beta2) * gv[i] * gv[i];
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(v[i]) / bc2;
        pv[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
      ++pi;
    }
    ++step_;
  }

  const Config& config() const { return cfg_; }
  std::vector<std::vector<T>>& moments_m() { return m_; }
  std::vector<std::vector<T>>& moments_v() { return v_; }
  void set_steps_done(std::int64_t s) { step_ = s; }

 private:
  Config cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace plus::train
