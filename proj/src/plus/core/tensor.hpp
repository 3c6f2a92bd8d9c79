#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "plus/core/error.hpp"
#include "plus/core/rng.hpp"

namespace plus {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline void check_shape_valid(const Shape& s) {
  for (auto e : s) {
    if (e < 1) throw ShapeError("invalid extent in shape " + shape_str(s));
  }
}

// Dense n-dimensional array over T (float for training, double for gradient
// checks). A Tensor is a cheap value handle: copies share the underlying
// buffer. Handles produced by tape-recorded ops additionally carry the id of
// their node on that tape.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    if (numel_of(shape_) != static_cast<std::int64_t>(values.size())) {
      throw ShapeError("value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape_));
    }
    buf_ = std::make_shared<std::vector<T>>(std::move(values));
  }

  static Tensor full(Shape shape, T value) {
    check_shape_valid(shape);
    auto n = numel_of(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<T>>(n, value);
    return t;
  }

  static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }

  static Tensor scalar(T value) { return full(Shape{1}, value); }

  // uniform in [lo, hi), deterministic per (seed, shape)
  static Tensor uniform(Shape shape, std::uint64_t seed, T lo, T hi) {
    check_shape_valid(shape);
    auto n = numel_of(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<T>>(n);
    Rng rng(seed);
    for (auto& v : *t.buf_) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  // standard normal, deterministic per (seed, shape)
  static Tensor randn(Shape shape, std::uint64_t seed, T mean = 0, T sigma = 1) {
    check_shape_valid(shape);
    auto n = numel_of(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<T>>(n);
    Rng rng(seed);
    for (auto& v : *t.buf_) v = static_cast<T>(rng.normal(mean, sigma));
    return t;
  }

  bool defined() const { return static_cast<bool>(buf_); }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t ndim() const { return shape_.size(); }
  std::int64_t numel() const { return buf_ ? static_cast<std::int64_t>(buf_->size()) : 0; }

  std::span<const T> data() const { return {buf_->data(), buf_->size()}; }
  // In-place mutation is only legal for tensors not recorded on a live tape
  // (parameters between steps, freshly created buffers).
  std::span<T> data_mut() { return {buf_->data(), buf_->size()}; }
  const T* ptr() const { return buf_->data(); }
  T* ptr_mut() { return buf_->data(); }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return (*buf_)[0];
  }

  T at(std::initializer_list<std::int64_t> idx) const {
    std::int64_t flat = 0;
    std::size_t i = 0;
    for (auto v : idx) {
      flat = flat * shape_[i] + v;
      ++i;
    }
    return (*buf_)[flat];
  }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool b) {
    requires_grad_ = b;
    return *this;
  }

  // identity of the underlying buffer; used to key gradient lookups
  const void* buffer_id() const { return buf_.get(); }

  // tape bookkeeping (set by ops when recording)
  std::int64_t node() const { return node_; }
  const void* tape_tag() const { return tape_tag_; }
  void bind_node(const void* tape, std::int64_t node) {
    tape_tag_ = tape;
    node_ = node;
  }

  // deep copy with fresh buffer, no tape membership
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<T>>(*buf_);
    t.requires_grad_ = requires_grad_;
    return t;
  }

  // same buffer viewed under a different shape (no tape recording; use the
  // reshape op for differentiable reshapes)
  Tensor view_as(Shape shape) const {
    if (numel_of(shape) != numel())
      throw ShapeError("view " + shape_str(shape) + " of " + shape_str(shape_));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

 private:
  std::shared_ptr<std::vector<T>> buf_;
  Shape shape_;
  const void* tape_tag_ = nullptr;
  std::int64_t node_ = -1;
  bool requires_grad_ = false;
};

}  // namespace plus
