#include "plus/data/prior.hpp"

#include <cmath>

namespace plus::data {

namespace {

constexpr std::int64_t kNeighbors[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};

}  // namespace

ByteVol dilate6(const ByteVol& mask, int steps) {
  const auto [nx, ny, nz] = mask.dims;
  ByteVol cur = mask;
  for (int s = 0; s < steps; ++s) {
    ByteVol next = cur;
    for (std::int64_t z = 0; z < nz; ++z) {
      for (std::int64_t y = 0; y < ny; ++y) {
        for (std::int64_t x = 0; x < nx; ++x) {
          if (!cur.v[cur.index(x, y, z)]) continue;
          for (const auto& d : kNeighbors) {
            const auto xx = x + d[0], yy = y + d[1], zz = z + d[2];
            if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz) continue;
            next.v[next.index(xx, yy, zz)] = 1;
          }
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

ByteVol erode6(const ByteVol& mask, int steps) {
  const auto [nx, ny, nz] = mask.dims;
  ByteVol cur = mask;
  for (int s = 0; s < steps; ++s) {
    ByteVol next = cur;
    for (std::int64_t z = 0; z < nz; ++z) {
      for (std::int64_t y = 0; y < ny; ++y) {
        for (std::int64_t x = 0; x < nx; ++x) {
          const auto idx = cur.index(x, y, z);
          if (!cur.v[idx]) continue;
          bool boundary = false;
          for (const auto& d : kNeighbors) {
            const auto xx = x + d[0], yy = y + d[1], zz = z + d[2];
            if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz ||
                !cur.v[cur.index(xx, yy, zz)]) {
              boundary = true;
              break;
            }
          }
          if (boundary) next.v[idx] = 0;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

PriorSet mock_prior_provider(const PatientCase& pc, const Corruption& corruption,
                             int total_classes, std::uint64_t seed) {
  corruption.validate();
  if (total_classes < 2) throw ConfigError("prior provider needs >= 2 classes");
  Rng rng(mix_seed(seed, fnv1a(pc.id)));
  PriorSet out;

  for (std::size_t gi = 0; gi < pc.lesions.size(); ++gi) {
    if (rng.uniform() < corruption.fn_rate) continue;
    const auto& gt = pc.lesions[gi];
    PriorCandidate cand;
    cand.matched_gt = static_cast<int>(gi);
    cand.mask = gt.mask;
    if (corruption.mask_jitter > 0) {
      const int steps = static_cast<int>(rng.below(corruption.mask_jitter + 1));
      if (steps > 0) {
        if (rng.uniform() < 0.5) {
          cand.mask = dilate6(gt.mask, steps);
        } else {
          auto eroded = erode6(gt.mask, steps);
          if (eroded.count() > 0) cand.mask = std::move(eroded);
        }
      }
    }
    // logits: margin on the argmax class, correct with probability
    // logit_accuracy, otherwise a uniformly random wrong class
    int target = gt.cls;
    if (rng.uniform() >= corruption.logit_accuracy) {
      const auto offset = 1 + rng.below(total_classes - 1);
      target = static_cast<int>((gt.cls + offset) % total_classes);
    }
    cand.logits.assign(total_classes, 0.0);
    cand.logits[target] = rng.uniform(1.0, 3.0);
    out.candidates.push_back(std::move(cand));
  }

  // false positives: small blobs over plain liver tissue
  const int n_fp = rng.poisson(corruption.fp_rate);
  std::vector<std::int64_t> liver_voxels;
  if (n_fp > 0) {
    for (std::int64_t i = 0; i < pc.liver.numel(); ++i) {
      if (pc.liver.v[i]) liver_voxels.push_back(i);
    }
  }
  const auto [nx, ny, nz] = pc.liver.dims;
  for (int f = 0; f < n_fp && !liver_voxels.empty(); ++f) {
    const auto center = liver_voxels[rng.below(liver_voxels.size())];
    const auto cz = center / (nx * ny), rem = center % (nx * ny);
    const auto cy = rem / nx, cx = rem % nx;
    const double ax = rng.uniform(2.0, 4.0), ay = rng.uniform(2.0, 4.0),
                 az = rng.uniform(1.0, 2.0);
    ByteVol mask = ByteVol::zeros(pc.liver.dims);
    std::int64_t voxels = 0;
    for (std::int64_t z = std::max<std::int64_t>(0, cz - 4);
         z <= std::min<std::int64_t>(nz - 1, cz + 4); ++z) {
      for (std::int64_t y = std::max<std::int64_t>(0, cy - 5);
           y <= std::min<std::int64_t>(ny - 1, cy + 5); ++y) {
        for (std::int64_t x = std::max<std::int64_t>(0, cx - 5);
             x <= std::min<std::int64_t>(nx - 1, cx + 5); ++x) {
          const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
          if (dx * dx + dy * dy + dz * dz <= 1.0 && pc.liver.v[pc.liver.index(x, y, z)]) {
            mask.v[mask.index(x, y, z)] = 1;
            ++voxels;
          }
        }
      }
    }
    if (voxels < 4) continue;
    PriorCandidate cand;
    cand.matched_gt = -1;
    cand.mask = std::move(mask);
    cand.logits.resize(total_classes);
    for (auto& l : cand.logits) l = rng.uniform(0.0, 2.0);
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

}  // namespace plus::data
