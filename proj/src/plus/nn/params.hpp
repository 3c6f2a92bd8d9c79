#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "plus/core/tensor.hpp"

namespace plus::nn {

// Named learnable tensors. Registration order is stable and drives optimizer
// state layout and the checkpoint format. Each parameter's values depend
// only on (init seed, name, shape): seeds are derived per name, so adding or
// reordering registrations does not shift other parameters' values.
template <typename T>
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // fan-in scaled uniform weight: U(-sqrt(1/fan_in), +sqrt(1/fan_in))
  Tensor<T>& weight(const std::string& name, Shape shape, std::int64_t fan_in) {
    if (fan_in < 1) throw ConfigError("non-positive fan-in for " + name);
    const T bound = static_cast<T>(std::sqrt(1.0 / static_cast<double>(fan_in)));
    return add(name, Tensor<T>::uniform(std::move(shape), mix_seed(seed_, fnv1a(name)),
                                        -bound, bound));
  }

  Tensor<T>& zeros(const std::string& name, Shape shape) {
    return add(name, Tensor<T>::zeros(std::move(shape)));
  }

  Tensor<T>& ones(const std::string& name, Shape shape) {
    return add(name, Tensor<T>::full(std::move(shape), T(1)));
  }

  Tensor<T>& constant(const std::string& name, Shape shape, T value) {
    return add(name, Tensor<T>::full(std::move(shape), value));
  }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return items_[it->second].second;
  }

  const Tensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return items_[it->second].second;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return items_.size(); }
  std::int64_t total_entries() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }

 private:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    if (index_.count(name)) throw ContractError("duplicate parameter: " + name);
    t.set_requires_grad(true);
    index_.emplace(name, items_.size());
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace plus::nn
