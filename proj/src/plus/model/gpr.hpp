#pragma once

#include "plus/nn/blocks.hpp"

namespace plus::model {

// Graph-based prior-aware reasoning. Enhanced lesion features form B central
// nodes; per-lesion prior-weighted prototypes form B more. One round of
// single-head self-attention over all 2B nodes produces messages, and the
// central-node messages gate a residual update:
//   F' = F + gate([F_psi || m_1:B]) * V_w
// With the gate projection zeroed this is exactly the identity on F.

enum class Fusion { none, gpr, distillation, gated, weighted };

inline const char* fusion_name(Fusion f) {
  switch (f) {
    case Fusion::none: return "none";
    case Fusion::gpr: return "gpr";
    case Fusion::distillation: return "distillation";
    case Fusion::gated: return "gated";
    case Fusion::weighted: return "weighted";
  }
  return "?";
}

inline Fusion fusion_from_name(const std::string& s) {
  if (s == "none") return Fusion::none;
  if (s == "gpr") return Fusion::gpr;
  if (s == "distillation") return Fusion::distillation;
  if (s == "gated") return Fusion::gated;
  if (s == "weighted") return Fusion::weighted;
  throw ConfigError("unknown fusion strategy: " + s);
}

template <typename T>
void init_gpr(nn::ParamSet<T>& ps, const std::string& name, std::int64_t classes,
              std::int64_t dim) {
  nn::init_linear(ps, name + ".psi", dim, dim);
  nn::init_linear(ps, name + ".wq", dim, dim);
  nn::init_linear(ps, name + ".wk", dim, dim);
  nn::init_linear(ps, name + ".wv", dim, dim);
  nn::init_linear(ps, name + ".gate", 2 * dim, dim);
  ps.weight(name + ".proto", {classes, dim}, dim);
}

template <typename T>
void check_gpr_inputs(const Tensor<T>& features, const Tensor<T>& prior_logits,
                      const Tensor<T>& proto) {
  if (features.ndim() != 2 || features.dim(0) < 1) {
    throw ContractError("gpr: feature batch must be [B x D] with B >= 1");
  }
  if (prior_logits.ndim() != 2 || prior_logits.dim(0) != features.dim(0)) {
    throw ShapeError("gpr: priors " + shape_str(prior_logits.shape()) + " vs features " +
                     shape_str(features.shape()));
  }
  if (prior_logits.dim(1) != proto.dim(0)) {
    throw ShapeError("gpr: prior classes " + shape_str(prior_logits.shape()) +
                     " vs prototypes " + shape_str(proto.shape()));
  }
}

// prior-weighted prototypes V_w = softmax_rows(P) * V_theta
template <typename T>
Tensor<T> weighted_prototypes(const nn::ParamSet<T>& ps, const std::string& name,
                              const Tensor<T>& prior_logits) {
  return ops::matmul(ops::softmax(prior_logits, 1), ps.at(name + ".proto"));
}

template <typename T>
Tensor<T> gpr_forward(const nn::ParamSet<T>& ps, const std::string& name,
                      const Tensor<T>& features, const Tensor<T>& prior_logits) {
  check_gpr_inputs(features, prior_logits, ps.at(name + ".proto"));
  const auto b = features.dim(0);
  const auto dim = features.dim(1);
  auto f_psi = nn::linear(ps, name + ".psi", features);
  auto v_w = weighted_prototypes(ps, name, prior_logits);
  auto nodes = ops::concat<T>({f_psi, v_w}, 0);
  auto q = nn::linear(ps, name + ".wq", nodes);
  auto k = nn::linear(ps, name + ".wk", nodes);
  auto v = nn::linear(ps, name + ".wv", nodes);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  auto alpha = ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d), 1);
  auto messages = ops::matmul(alpha, v);
  auto central = ops::slice(messages, 0, 0, b);
  auto gate = nn::linear(ps, name + ".gate", ops::concat<T>({f_psi, central}, 1));
  return ops::add(features, ops::mul(gate, v_w));
}

// attention matrix over the 2B nodes (diagnostics / tests)
template <typename T>
Tensor<T> gpr_attention(const nn::ParamSet<T>& ps, const std::string& name,
                        const Tensor<T>& features, const Tensor<T>& prior_logits) {
  check_gpr_inputs(features, prior_logits, ps.at(name + ".proto"));
  auto f_psi = nn::linear(ps, name + ".psi", features);
  auto v_w = weighted_prototypes(ps, name, prior_logits);
  auto nodes = ops::concat<T>({f_psi, v_w}, 0);
  auto q = nn::linear(ps, name + ".wq", nodes);
  auto k = nn::linear(ps, name + ".wk", nodes);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(features.dim(1)));
  return ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d), 1);
}

// ---------------------------------------------------------------------------
// baseline fusion strategies (ablation arms)

template <typename T>
void init_fusion_baselines(nn::ParamSet<T>& ps, const std::string& name, std::int64_t dim) {
  nn::init_linear(ps, name + ".gated", 2 * dim, dim);
  ps.constant(name + ".wscalar", {1}, T(0.5));
}

// gated: F' = g * F + (1-g) * V_w with g = sigmoid(linear([F || V_w]))
template <typename T>
Tensor<T> fuse_gated(const nn::ParamSet<T>& ps, const std::string& fuse_name,
                     const std::string& gpr_name, const Tensor<T>& features,
                     const Tensor<T>& prior_logits) {
  auto v_w = weighted_prototypes(ps, gpr_name, prior_logits);
  auto g = ops::sigmoid(
      nn::linear(ps, fuse_name + ".gated", ops::concat<T>({features, v_w}, 1)));
  auto inv_g = ops::add_const(ops::scale(g, -1.0), 1.0);
  return ops::add(ops::mul(g, features), ops::mul(inv_g, v_w));
}

// weighted: F' = w * F + (1-w) * V_w with a learnable scalar w
template <typename T>
Tensor<T> fuse_weighted(const nn::ParamSet<T>& ps, const std::string& fuse_name,
                        const std::string& gpr_name, const Tensor<T>& features,
                        const Tensor<T>& prior_logits) {
  auto v_w = weighted_prototypes(ps, gpr_name, prior_logits);
  const auto& w = ps.at(fuse_name + ".wscalar");
  auto inv_w = ops::add_const(ops::scale(w, -1.0), 1.0);
  return ops::add(ops::mul(features, w), ops::mul(v_w, inv_w));
}

// distillation keeps features unchanged; the auxiliary KL term
// KL(softmax(P) || refined distribution) is added to the training loss.
template <typename T>
Tensor<T> distillation_kl(const Tensor<T>& prior_logits, const Tensor<T>& refined_probs,
                          double clamp_eps = 1e-7) {
  auto p_teacher = ops::softmax(prior_logits, 1);
  auto t_clamped = ops::clamp(p_teacher, clamp_eps, 1.0 - clamp_eps);
  auto s_clamped = ops::clamp(refined_probs, clamp_eps, 1.0 - clamp_eps);
  auto lr = ops::sub(ops::log(t_clamped), ops::log(s_clamped));
  auto per_row = ops::reduce_sum(ops::mul(p_teacher, lr), 1);
  return ops::reduce_mean_all(per_row);
}

template <typename T>
void init_classify_head(nn::ParamSet<T>& ps, const std::string& name, std::int64_t dim,
                        std::int64_t classes) {
  nn::init_linear(ps, name, dim, classes);
}

// refined logits [B x C]; downstream losses apply row softmax
template <typename T>
Tensor<T> classify_head(const nn::ParamSet<T>& ps, const std::string& name,
                        const Tensor<T>& features) {
  return nn::linear(ps, name, features);
}

}  // namespace plus::model
