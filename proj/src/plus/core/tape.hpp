#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "plus/core/tensor.hpp"
#include "plus/kernels/kernels.hpp"

namespace plus {

// Recorded computation for one forward pass. Ops append nodes in execution
// order (inputs always precede outputs), so reverse iteration visits each
// node exactly once during backward. Leaves are registered lazily the first
// time a requires-grad tensor feeds an op; they are keyed by buffer identity
// so distinct handles to one parameter resolve to one node.
//
// A tape is confined to one thread; activation is scoped.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(active_ptr()) { active_ptr() = &t; }
    ~Scope() { active_ptr() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* active() { return active_ptr(); }

  std::int64_t add_node(const char* op, BackwardFn backward, Tensor<T>& out) {
    nodes_.push_back(Node{op, std::move(backward)});
    const auto id = static_cast<std::int64_t>(nodes_.size()) - 1;
    out.bind_node(this, id);
    return id;
  }

  // Resolve the node feeding gradient to t: an op output recorded on this
  // tape, an already-registered leaf, or a new leaf if t requires grad.
  // Returns -1 for constants.
  std::int64_t node_of(const Tensor<T>& t) {
    if (t.tape_tag() == this && t.node() >= 0) return t.node();
    auto it = leaves_.find(t.buffer_id());
    if (it != leaves_.end()) return it->second;
    if (t.requires_grad()) {
      nodes_.push_back(Node{"leaf", nullptr});
      const auto id = static_cast<std::int64_t>(nodes_.size()) - 1;
      leaves_.emplace(t.buffer_id(), id);
      return id;
    }
    return -1;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }

  // Accumulate g into the gradient slot of node. Adopting always copies so
  // that later in-place accumulation can never alias a downstream gradient.
  void accumulate(std::int64_t node, const Tensor<T>& g) {
    auto& slot = grads_[node];
    if (!slot.defined()) {
      slot = g.clone();
    } else {
      kern::active<T>().axpy(T(1), g.ptr(), slot.ptr_mut(), slot.numel());
    }
  }

  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    }
    if (loss.tape_tag() != this || loss.node() < 0) {
      throw ContractError("backward: loss is not recorded on this tape");
    }
    grads_.assign(nodes_.size(), Tensor<T>{});
    grads_[loss.node()] = Tensor<T>::ones(loss.shape());
    for (std::int64_t i = loss.node(); i >= 0; --i) {
      if (!grads_[i].defined()) continue;
      if (nodes_[i].backward) nodes_[i].backward(*this, grads_[i]);
    }
    ran_backward_ = true;
  }

  // Gradient of the last backward() w.r.t. t; zeros when t is unreachable.
  Tensor<T> grad(const Tensor<T>& t) const {
    if (!ran_backward_) throw ContractError("grad() before backward()");
    std::int64_t id = -1;
    if (t.tape_tag() == this && t.node() >= 0) {
      id = t.node();
    } else {
      auto it = leaves_.find(t.buffer_id());
      if (it != leaves_.end()) id = it->second;
    }
    if (id < 0 || id >= static_cast<std::int64_t>(grads_.size()) || !grads_[id].defined()) {
      return Tensor<T>::zeros(t.shape());
    }
    return grads_[id];
  }

 private:
  struct Node {
    const char* op;
    BackwardFn backward;
  };

  static Tape*& active_ptr() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::unordered_map<const void*, std::int64_t> leaves_;
  bool ran_backward_ = false;
};

}  // namespace plus
