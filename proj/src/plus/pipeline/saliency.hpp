#pragma once

#include "plus/pipeline/forward.hpp"

namespace plus::pipeline {

// Input-gradient saliency: |d(refined logit of target class, summed over
// candidates) / d(voxel)|. Voxels outside the liver mask and all candidate
// masks receive exactly zero (they are gated out of every compute path).
template <typename T>
data::FloatVol saliency_map(const Model<T>& m, const data::PatientCase& pc,
                            const data::PriorSet& priors, int target_class) {
  if (target_class < 0 || target_class >= m.cfg.classes) {
    throw ContractError("saliency target class out of range");
  }
  if (priors.candidates.empty()) {
    throw ContractError("saliency requires at least one candidate");
  }
  auto vol = pc.volume;
  normalize_over_liver(vol, pc.liver);
  auto vt = volume_tensor<T>(vol);
  vt.set_requires_grad(true);

  Tape<T> tape;
  typename Tape<T>::Scope scope(tape);
  auto feats = encode_case(m, vt, pc.liver, priors);
  Tensor<T> refined;
  switch (m.cfg.fusion) {
    case model::Fusion::gpr:
      refined = model::gpr_forward(m.params, "gpr", feats.features, feats.prior_logits);
      break;
    case model::Fusion::gated:
      refined = model::fuse_gated(m.params, "fuse", "gpr", feats.features, feats.prior_logits);
      break;
    case model::Fusion::weighted:
      refined =
          model::fuse_weighted(m.params, "fuse", "gpr", feats.features, feats.prior_logits);
      break;
    case model::Fusion::none:
    case model::Fusion::distillation:
      refined = feats.features;
      break;
  }
  auto logits = model::classify_head(m.params, "head", refined);
  auto target = ops::reduce_sum_all(ops::slice(logits, 1, target_class, 1));
  tape.backward(target);
  auto grad = tape.grad(vt);

  data::FloatVol out = data::FloatVol::zeros(pc.volume.dims);
  out.spacing = pc.volume.spacing;
  const auto* g = grad.ptr();
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    out.v[i] = static_cast<float>(std::abs(static_cast<double>(g[i])));
  }
  return out;
}

}  // namespace plus::pipeline
