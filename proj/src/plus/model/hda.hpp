#pragma once

#include <array>

#include "plus/model/encoders.hpp"

namespace plus::model {

// Hierarchical dual attention: K pooled views of the liver feature map each
// exchange information with the lesion tokens through dual cross-attention,
// and the fused token set collapses to one enhanced vector per lesion.

struct HdaConfig {
  std::vector<std::array<std::int64_t, 3>> scale_grids;  // K pooling grids
  nn::AttentionConfig attn;

  std::int64_t scales() const { return static_cast<std::int64_t>(scale_grids.size()); }

  void validate(std::array<std::int64_t, 3> liver_map) const {
    if (scale_grids.empty()) throw ConfigError("hda needs at least one scale grid");
    for (const auto& g : scale_grids) {
      for (int i = 0; i < 3; ++i) {
        if (g[i] < 1 || g[i] > liver_map[i]) {
          throw ConfigError("hda scale grid exceeds liver feature map extents");
        }
      }
    }
  }
};

template <typename T>
void init_hda(nn::ParamSet<T>& ps, const std::string& name, const HdaConfig& cfg) {
  nn::init_mha(ps, name + ".attn", cfg.attn);
  nn::init_linear(ps, name + ".f1", cfg.attn.dim, cfg.attn.dim);
  nn::init_linear(ps, name + ".f2", cfg.attn.dim, cfg.attn.dim);
  nn::init_linear(ps, name + ".f3", cfg.attn.dim, cfg.attn.dim);
  nn::init_layer_norm(ps, name + ".ln_ctx", cfg.attn.dim);
  nn::init_layer_norm(ps, name + ".ln_les", cfg.attn.dim);
  nn::init_layer_norm(ps, name + ".ln_fuse", cfg.attn.dim);
}

// A(F_a, F_b): queries from F_a, keys/values from F_b, shared projections.
template <typename T>
Tensor<T> cross_attend(const nn::ParamSet<T>& ps, const std::string& name, const HdaConfig& cfg,
                       const Tensor<T>& f_a, const Tensor<T>& f_b) {
  if (f_b.dim(0) < 1) throw ContractError("cross_attend: empty key/value token set");
  return nn::mha(ps, name + ".attn", cfg.attn, f_a, f_b);
}

// Dual cross-attention over token sets F_x (context) and F_y (lesion):
//   F_x' = f2(A(F_x, F_y));  DCA = [F_x' ; f3(A(F_y, F_x'))]
// Output token count is tokens(F_x) + tokens(F_y).
template <typename T>
Tensor<T> dca(const nn::ParamSet<T>& ps, const std::string& name, const HdaConfig& cfg,
              const Tensor<T>& f_x, const Tensor<T>& f_y) {
  if (f_x.dim(0) < 1 || f_y.dim(0) < 1) throw ContractError("dca: empty token set");
  auto fx_prime = nn::linear(ps, name + ".f2", cross_attend(ps, name, cfg, f_x, f_y));
  auto back = nn::linear(ps, name + ".f3", cross_attend(ps, name, cfg, f_y, fx_prime));
  return ops::concat<T>({fx_prime, back}, 0);
}

// liver_map: encoder output [D, a, b, c] before token flattening;
// lesion_tokens: [n_les x D]. Returns the enhanced lesion feature [1 x D].
template <typename T>
Tensor<T> hda_forward(const nn::ParamSet<T>& ps, const std::string& name, const HdaConfig& cfg,
                      const Tensor<T>& liver_map, const Tensor<T>& lesion_tokens) {
  cfg.validate({liver_map.dim(1), liver_map.dim(2), liver_map.dim(3)});
  auto les = nn::layer_norm(ps, name + ".ln_les", lesion_tokens);
  std::vector<Tensor<T>> fused;
  fused.reserve(cfg.scale_grids.size());
  for (const auto& grid : cfg.scale_grids) {
    auto pooled = ops::adaptive_mean_pool3d(liver_map, grid);
    auto ctx = nn::layer_norm(ps, name + ".ln_ctx", map_to_tokens(pooled));
    fused.push_back(dca(ps, name, cfg, ctx, les));
  }
  auto all = fused.size() == 1 ? fused[0] : ops::concat(fused, 0);
  auto normed = nn::layer_norm(ps, name + ".ln_fuse", all);
  auto pooled_vec = ops::reshape(ops::reduce_mean(normed, 0), {1, cfg.attn.dim});
  return nn::linear(ps, name + ".f1", pooled_vec);
}

// token count entering the final mean pool: sum_i (tokens(grid_i) + n_les)
inline std::int64_t hda_prepool_tokens(const HdaConfig& cfg, std::int64_t lesion_tokens) {
  std::int64_t total = 0;
  for (const auto& g : cfg.scale_grids) total += g[0] * g[1] * g[2] + lesion_tokens;
  return total;
}

}  // namespace plus::model
