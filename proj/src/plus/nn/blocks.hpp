#pragma once

#include "plus/core/ops.hpp"
#include "plus/core/ops_spatial.hpp"
#include "plus/nn/params.hpp"

namespace plus::nn {

struct AttentionConfig {
  std::int64_t dim = 128;
  std::int64_t heads = 4;

  std::int64_t head_dim() const {
    if (heads < 1 || dim % heads != 0) {
      throw ConfigError("model dim " + std::to_string(dim) + " not divisible by heads " +
                        std::to_string(heads));
    }
    return dim / heads;
  }
};

// y = x W + b with W[in x out]
template <typename T>
void init_linear(ParamSet<T>& ps, const std::string& name, std::int64_t in, std::int64_t out) {
  ps.weight(name + ".w", {in, out}, in);
  ps.zeros(name + ".b", {out});
}

template <typename T>
Tensor<T> linear(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  const auto& w = ps.at(name + ".w");
  if (x.ndim() != 2 || x.dim(1) != w.dim(0)) {
    throw ShapeError("linear " + name + ": input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  return ops::add_rowvec(ops::matmul(x, w), ps.at(name + ".b"));
}

template <typename T>
void init_layer_norm(ParamSet<T>& ps, const std::string& name, std::int64_t dim) {
  ps.ones(name + ".g", {dim});
  ps.zeros(name + ".b", {dim});
}

template <typename T>
Tensor<T> layer_norm(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  return ops::layer_norm(x, ps.at(name + ".g"), ps.at(name + ".b"));
}

template <typename T>
void init_conv3d(ParamSet<T>& ps, const std::string& name, std::int64_t cin, std::int64_t cout,
                 std::int64_t k) {
  ps.weight(name + ".w", {cout, cin, k, k, k}, cin * k * k * k);
  ps.zeros(name + ".b", {cout});
}

template <typename T>
Tensor<T> conv3d(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x,
                 std::int64_t stride, std::int64_t pad) {
  return ops::conv3d(x, ps.at(name + ".w"), ps.at(name + ".b"), stride, pad);
}

template <typename T>
void init_mha(ParamSet<T>& ps, const std::string& name, const AttentionConfig& cfg) {
  init_linear(ps, name + ".q", cfg.dim, cfg.dim);
  init_linear(ps, name + ".k", cfg.dim, cfg.dim);
  init_linear(ps, name + ".v", cfg.dim, cfg.dim);
  init_linear(ps, name + ".o", cfg.dim, cfg.dim);
}

// Multi-head attention; queries from q_src[m x D], keys/values from
// kv_src[n x D]. Per head: softmax(Q K^T / sqrt(d)) V, heads concatenated
// and projected back to D. No positional encoding.
template <typename T>
Tensor<T> mha(const ParamSet<T>& ps, const std::string& name, const AttentionConfig& cfg,
              const Tensor<T>& q_src, const Tensor<T>& kv_src) {
  if (q_src.ndim() != 2 || kv_src.ndim() != 2 || q_src.dim(1) != cfg.dim ||
      kv_src.dim(1) != cfg.dim) {
    throw ShapeError("mha " + name + ": q " + shape_str(q_src.shape()) + ", kv " +
                     shape_str(kv_src.shape()) + ", dim " + std::to_string(cfg.dim));
  }
  if (kv_src.dim(0) < 1) throw ContractError("mha " + name + ": empty key/value set");
  const auto d = cfg.head_dim();
  auto q = linear(ps, name + ".q", q_src);
  auto k = linear(ps, name + ".k", kv_src);
  auto v = linear(ps, name + ".v", kv_src);
  std::vector<Tensor<T>> heads;
  heads.reserve(cfg.heads);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::int64_t h = 0; h < cfg.heads; ++h) {
    auto qh = ops::slice(q, 1, h * d, d);
    auto kh = ops::slice(k, 1, h * d, d);
    auto vh = ops::slice(v, 1, h * d, d);
    auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt_d);
    auto attn = ops::softmax(scores, 1);
    heads.push_back(ops::matmul(attn, vh));
  }
  auto merged = cfg.heads == 1 ? heads[0] : ops::concat(heads, 1);
  return linear(ps, name + ".o", merged);
}

// Attention weights only (row-stochastic check helper); head-major [H*m x n].
template <typename T>
Tensor<T> mha_attention_rows(const ParamSet<T>& ps, const std::string& name,
                             const AttentionConfig& cfg, const Tensor<T>& q_src,
                             const Tensor<T>& kv_src) {
  const auto d = cfg.head_dim();
  auto q = linear(ps, name + ".q", q_src);
  auto k = linear(ps, name + ".k", kv_src);
  std::vector<Tensor<T>> rows;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::int64_t h = 0; h < cfg.heads; ++h) {
    auto qh = ops::slice(q, 1, h * d, d);
    auto kh = ops::slice(k, 1, h * d, d);
    rows.push_back(ops::softmax(ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt_d), 1));
  }
  return rows.size() == 1 ? rows[0] : ops::concat(rows, 0);
}

}  // namespace plus::nn
