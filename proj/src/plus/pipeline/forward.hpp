#pragma once

#include "plus/data/prior.hpp"
#include "plus/model/hda.hpp"
#include "plus/pipeline/config.hpp"

namespace plus::pipeline {

// Model assembly and the per-case forward pass
//   f(I, M_liver, {candidates}) -> refined class probabilities.

template <typename T>
struct Model {
  RunConfig cfg;
  model::EncoderConfig enc;
  model::HdaConfig hda;
  nn::ParamSet<T> params;

  explicit Model(const RunConfig& config)
      : cfg(config),
        enc(model::EncoderConfig::with_dim(config.enc_widths, config.dim)),
        params(config.seed_init) {
    cfg.validate();
    hda.attn.dim = cfg.dim;
    hda.attn.heads = cfg.heads;
    for (const auto& g : cfg.hda_scales) hda.scale_grids.push_back(zyx(g));
    model::init_encoder(params, "enc.liver", enc);
    model::init_encoder(params, "enc.lesion", enc);
    model::init_hda(params, "hda", hda);
    model::init_gpr(params, "gpr", cfg.classes, cfg.dim);
    model::init_fusion_baselines(params, "fuse", cfg.dim);
    model::init_classify_head(params, "head", cfg.dim, cfg.classes);
  }
};

// voxel centroid of a mask, floor of the mean coordinate per axis (x, y, z)
inline std::array<std::int64_t, 3> mask_centroid(const data::ByteVol& mask) {
  std::int64_t n = 0;
  std::array<double, 3> acc{0, 0, 0};
  const auto [nx, ny, nz] = mask.dims;
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        if (mask.v[mask.index(x, y, z)]) {
          acc[0] += static_cast<double>(x);
          acc[1] += static_cast<double>(y);
          acc[2] += static_cast<double>(z);
          ++n;
        }
      }
    }
  }
  if (n == 0) throw ContractError("mask_centroid of an empty mask");
  return {static_cast<std::int64_t>(std::floor(acc[0] / n)),
          static_cast<std::int64_t>(std::floor(acc[1] / n)),
          static_cast<std::int64_t>(std::floor(acc[2] / n))};
}

// Normalization to zero mean / unit variance over liver voxels; statistics
// depend on liver voxels only, preserving strict mask locality.
inline void normalize_over_liver(data::FloatVol& vol, const data::ByteVol& liver) {
  double sum = 0, sum2 = 0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < vol.numel(); ++i) {
    if (liver.v[i]) {
      sum += vol.v[i];
      sum2 += static_cast<double>(vol.v[i]) * vol.v[i];
      ++n;
    }
  }
  if (n == 0) throw DataError("case has an empty liver mask");
  const double mean = sum / n;
  const double var = std::max(sum2 / n - mean * mean, 1e-12);
  const float inv = static_cast<float>(1.0 / std::sqrt(var));
  const float mu = static_cast<float>(mean);
  for (auto& v : vol.v) v = (v - mu) * inv;
}

// nearest-neighbor resample onto a new spacing (only used when a case's
// spacing differs from the reference)
inline data::FloatVol resample_nearest(const data::FloatVol& vol,
                                       std::array<double, 3> target_spacing) {
  data::FloatVol out;
  out.spacing = target_spacing;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(vol.dims[a]) * vol.spacing[a] / target_spacing[a]));
  }
  out.v.resize(static_cast<std::size_t>(out.numel()));
  for (std::int64_t z = 0; z < out.dims[2]; ++z) {
    const auto sz = std::min<std::int64_t>(
        vol.dims[2] - 1, std::llround(z * target_spacing[2] / vol.spacing[2]));
    for (std::int64_t y = 0; y < out.dims[1]; ++y) {
      const auto sy = std::min<std::int64_t>(
          vol.dims[1] - 1, std::llround(y * target_spacing[1] / vol.spacing[1]));
      for (std::int64_t x = 0; x < out.dims[0]; ++x) {
        const auto sx = std::min<std::int64_t>(
            vol.dims[0] - 1, std::llround(x * target_spacing[0] / vol.spacing[0]));
        out.v[out.index(x, y, z)] = vol.v[vol.index(sx, sy, sz)];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> volume_tensor(const data::FloatVol& vol) {
  std::vector<T> buf(vol.v.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(vol.v[i]);
  return Tensor<T>({1, vol.dims[2], vol.dims[1], vol.dims[0]}, std::move(buf));
}

template <typename T>
Tensor<T> mask_tensor(const data::ByteVol& mask) {
  std::vector<T> buf(mask.v.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = mask.v[i] ? T(1) : T(0);
  return Tensor<T>({1, mask.dims[2], mask.dims[1], mask.dims[0]}, std::move(buf));
}

template <typename T>
Tensor<T> mask_tensor_window(const data::ByteVol& mask, std::array<std::int64_t, 3> origin_zyx,
                             std::array<std::int64_t, 3> extent_zyx) {
  std::vector<T> buf(
      static_cast<std::size_t>(extent_zyx[0] * extent_zyx[1] * extent_zyx[2]));
  std::size_t o = 0;
  for (std::int64_t z = 0; z < extent_zyx[0]; ++z) {
    for (std::int64_t y = 0; y < extent_zyx[1]; ++y) {
      for (std::int64_t x = 0; x < extent_zyx[2]; ++x, ++o) {
        const auto zz = z + origin_zyx[0], yy = y + origin_zyx[1], xx = x + origin_zyx[2];
        const bool in = zz >= 0 && zz < mask.dims[2] && yy >= 0 && yy < mask.dims[1] &&
                        xx >= 0 && xx < mask.dims[0];
        buf[o] = in && mask.at(xx, yy, zz) ? T(1) : T(0);
      }
    }
  }
  return Tensor<T>({1, extent_zyx[0], extent_zyx[1], extent_zyx[2]}, std::move(buf));
}

// Features and bookkeeping for one case's candidates.
template <typename T>
struct CaseFeatures {
  Tensor<T> features;        // [B x D] enhanced (or plain) lesion features
  Tensor<T> prior_logits;    // [B x C] constant
  std::vector<int> matched_gt;
};

// Per-candidate feature extraction: liver branch once, then ROI encoding and
// (optionally) HDA per candidate. The caller owns tape activation.
template <typename T>
CaseFeatures<T> encode_case(const Model<T>& m, const Tensor<T>& norm_volume,
                            const data::ByteVol& liver_mask, const data::PriorSet& priors) {
  if (priors.candidates.empty()) {
    throw ContractError("encode_case: no candidates (caller must skip such cases)");
  }
  Tensor<T> liver_map;
  if (m.cfg.use_hda) {
    auto liver_gated = ops::mul(norm_volume, mask_tensor<T>(liver_mask));
    auto liver_small = ops::adaptive_mean_pool3d(liver_gated, zyx(m.cfg.liver_grid));
    liver_map = model::encoder_forward(m.params, "enc.liver", liver_small);
  }

  const auto roi_zyx = zyx(m.cfg.roi);
  std::vector<Tensor<T>> rows;
  CaseFeatures<T> out;
  for (const auto& cand : priors.candidates) {
    if (cand.mask.count() == 0) throw DataError("candidate with empty mask");
    const auto c = mask_centroid(cand.mask);
    const std::array<std::int64_t, 3> origin{c[2] - roi_zyx[0] / 2, c[1] - roi_zyx[1] / 2,
                                             c[0] - roi_zyx[2] / 2};
    auto roi_vol = ops::crop3d(norm_volume, origin, roi_zyx);
    auto roi_gated = ops::mul(roi_vol, mask_tensor_window<T>(cand.mask, origin, roi_zyx));
    auto lesion_map = model::encoder_forward(m.params, "enc.lesion", roi_gated);
    auto tokens = model::map_to_tokens(ops::adaptive_mean_pool3d(lesion_map, {1, 2, 2}));
    if (m.cfg.use_hda) {
      rows.push_back(model::hda_forward(m.params, "hda", m.hda, liver_map, tokens));
    } else {
      rows.push_back(ops::reshape(ops::reduce_mean(tokens, 0), {1, m.cfg.dim}));
    }
    out.matched_gt.push_back(cand.matched_gt);
  }
  out.features = rows.size() == 1 ? rows[0] : ops::concat(rows, 0);

  std::vector<T> logits;
  for (const auto& cand : priors.candidates) {
    if (static_cast<int>(cand.logits.size()) != m.cfg.classes) {
      throw ShapeError("prior logits class count mismatch");
    }
    for (double v : cand.logits) logits.push_back(static_cast<T>(v));
  }
  out.prior_logits = Tensor<T>(
      {static_cast<std::int64_t>(priors.candidates.size()), m.cfg.classes}, std::move(logits));
  return out;
}

// Fusion + classification head; returns refined probabilities [B x C].
template <typename T>
Tensor<T> refine_and_classify(const Model<T>& m, const Tensor<T>& features,
                              const Tensor<T>& prior_logits) {
  Tensor<T> refined;
  switch (m.cfg.fusion) {
    case model::Fusion::gpr:
      refined = model::gpr_forward(m.params, "gpr", features, prior_logits);
      break;
    case model::Fusion::gated:
      refined = model::fuse_gated(m.params, "fuse", "gpr", features, prior_logits);
      break;
    case model::Fusion::weighted:
      refined = model::fuse_weighted(m.params, "fuse", "gpr", features, prior_logits);
      break;
    case model::Fusion::none:
    case model::Fusion::distillation:
      refined = features;
      break;
  }
  auto logits = model::classify_head(m.params, "head", refined);
  return ops::softmax(logits, 1);
}

// Whole-case forward for evaluation and saliency. Throws ContractError on
// zero candidates; callers decide the skip policy.
template <typename T>
struct ForwardResult {
  Tensor<T> probs;           // [B x C]
  std::vector<int> matched_gt;
};

template <typename T>
ForwardResult<T> forward_case(const Model<T>& m, const data::PatientCase& pc,
                              const data::PriorSet& priors) {
  for (const auto& cand : priors.candidates) {
    if (cand.mask.dims != pc.volume.dims) {
      throw DataError("candidate mask outside volume bounds for case " + pc.id);
    }
  }
  auto vol = pc.volume;
  normalize_over_liver(vol, pc.liver);
  auto vt = volume_tensor<T>(vol);
  auto feats = encode_case(m, vt, pc.liver, priors);
  ForwardResult<T> out;
  out.probs = refine_and_classify(m, feats.features, feats.prior_logits);
  out.matched_gt = std::move(feats.matched_gt);
  return out;
}

}  // namespace plus::pipeline
