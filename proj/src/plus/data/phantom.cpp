#include "plus/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace plus::data {

namespace {

struct Ellipsoid {
  double cx, cy, cz;
  double ax, ay, az;

  double rho(double x, double y, double z) const {
    const double dx = (x - cx) / ax, dy = (y - cy) / ay, dz = (z - cz) / az;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

int sample_index(Rng& rng, const std::vector<double>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  if (total <= 0) throw DataError("class sampling weights are all zero");
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

void GenSpec::validate() const {
  for (auto e : volume) {
    if (e < 32) throw ConfigError("generator volume extents must be >= 32");
  }
  if (classes < 3) throw ConfigError("generator needs >= 2 lesion classes + non-lesion");
  if (static_cast<int>(signatures.size()) != lesion_classes()) {
    throw ConfigError("signature count must equal lesion class count");
  }
  if (!flat_class_prior.empty() &&
      static_cast<int>(flat_class_prior.size()) != lesion_classes()) {
    throw ConfigError("flat class prior size mismatch");
  }
  if (healthy_fraction < 0 || healthy_fraction > 1) {
    throw ConfigError("healthy fraction out of range");
  }
  // rough capacity check: lesions must fit inside the liver with room to spare
  const double liver_vol = 0.15 * static_cast<double>(volume[0] * volume[1] * volume[2]);
  const double lesion_vol =
      4.19 * radius_xy_max * radius_xy_max * radius_z_max * max_lesions;
  if (lesion_vol > 0.5 * liver_vol) {
    throw ConfigError("generator spec demands more lesion volume than the liver holds");
  }
}

GenSpec default_gen_spec() {
  GenSpec s;
  s.signatures.resize(4);
  // class 0, "malignant A": dark lesion, cirrhosis-only. Its local twin is
  // class 2, so liver context is the only way to tell them apart.
  s.signatures[0] = {-0.30, 0.06, 0.90, 0.25, true, {0.00, 0.00, 0.55}};
  // class 1, "malignant B": bright fine-textured lesion; weakly separable
  // from class 3 locally, the prior logits carry most of the signal.
  s.signatures[1] = {0.28, 0.07, 0.80, 0.0, true, {0.30, 0.25, 0.15}};
  // class 2, "benign A": local twin of class 0, never under cirrhosis
  s.signatures[2] = {-0.30, 0.06, 0.90, 0.25, false, {0.50, 0.45, 0.00}};
  // class 3, "benign B": bright coarse-textured lesion
  s.signatures[3] = {0.28, 0.07, 0.50, 0.0, false, {0.20, 0.30, 0.30}};
  return s;
}

ByteVol largest_component(const ByteVol& mask) {
  const auto [nx, ny, nz] = mask.dims;
  std::vector<std::int32_t> label(mask.v.size(), -1);
  std::int32_t next = 0;
  std::int64_t best_count = 0;
  std::int32_t best_label = -1;
  std::deque<std::int64_t> queue;
  for (std::int64_t start = 0; start < mask.numel(); ++start) {
    if (!mask.v[start] || label[start] >= 0) continue;
    std::int64_t count = 0;
    label[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const auto idx = queue.front();
      queue.pop_front();
      ++count;
      const auto z = idx / (nx * ny), rem = idx % (nx * ny);
      const auto y = rem / nx, x = rem % nx;
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            if (!dx && !dy && !dz) continue;
            const auto xx = x + dx, yy = y + dy, zz = z + dz;
            if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz) continue;
            const auto nidx = mask.index(xx, yy, zz);
            if (mask.v[nidx] && label[nidx] < 0) {
              label[nidx] = next;
              queue.push_back(nidx);
            }
          }
        }
      }
    }
    if (count > best_count) {
      best_count = count;
      best_label = next;
    }
    ++next;
  }
  ByteVol out = ByteVol::zeros(mask.dims);
  if (best_label >= 0) {
    for (std::size_t i = 0; i < mask.v.size(); ++i) out.v[i] = label[i] == best_label;
  }
  return out;
}

double mean_intensity(const FloatVol& vol, const ByteVol& mask) {
  double sum = 0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < vol.numel(); ++i) {
    if (mask.v[i]) {
      sum += vol.v[i];
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

PatientCase generate_case(std::uint64_t seed, const GenSpec& spec) {
  spec.validate();
  Rng rng(seed);
  const auto [nx, ny, nz] = spec.volume;

  PatientCase pc;
  pc.id = "case_" + std::to_string(seed);
  pc.seed = seed;
  pc.volume = FloatVol::zeros(spec.volume);
  pc.volume.spacing = spec.spacing;
  pc.liver = ByteVol::zeros(spec.volume);

  // condition
  {
    std::vector<double> w(spec.condition_prior.begin(), spec.condition_prior.end());
    pc.condition = static_cast<LiverCondition>(sample_index(rng, w));
  }
  const bool cirrhotic = pc.condition == LiverCondition::cirrhosis;

  // liver geometry
  Ellipsoid liver{
      nx / 2.0 + rng.uniform(-4, 4), ny / 2.0 + rng.uniform(-4, 4),
      nz / 2.0 + rng.uniform(-2, 2), 0.36 * nx * rng.uniform(0.95, 1.05),
      0.33 * ny * rng.uniform(0.95, 1.05), 0.38 * nz * rng.uniform(0.95, 1.05)};
  const double irregularity = cirrhotic ? 0.12 : 0.02;
  const double bp1 = rng.uniform(0, 6.28), bp2 = rng.uniform(0, 6.28);

  // appearance
  const double liver_base = pc.condition == LiverCondition::steatosis ? 0.30 : 0.55;
  const double liver_noise = cirrhotic ? 0.055 : 0.045;
  const double tex_amp = cirrhotic ? 0.09 : (pc.condition == LiverCondition::steatosis ? 0.03 : 0.02);
  const double tp1 = rng.uniform(0, 6.28), tp2 = rng.uniform(0, 6.28);

  std::vector<std::int64_t> liver_voxels;
  liver_voxels.reserve(static_cast<std::size_t>(pc.volume.numel() / 6));
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const auto idx = pc.volume.index(x, y, z);
        const double theta = std::atan2(y - liver.cy, x - liver.cx);
        const double wz = (z - liver.cz) / liver.az;
        const double bump =
            1.0 + irregularity * std::sin(3.0 * theta + bp1) * std::cos(2.0 * wz * 3.14 + bp2);
        const bool inside = liver.rho(x, y, z) <= bump;
        if (inside) {
          pc.liver.v[idx] = 1;
          liver_voxels.push_back(idx);
          const double tex = tex_amp * std::sin(0.5 * x + tp1) * std::sin(0.45 * y + tp2);
          pc.volume.v[idx] = static_cast<float>(liver_base + tex + rng.normal(0, liver_noise));
        } else {
          pc.volume.v[idx] = static_cast<float>(0.10 + rng.normal(0, 0.02));
        }
      }
    }
  }

  // lesions
  int target_lesions = 0;
  if (rng.uniform() >= spec.healthy_fraction && spec.max_lesions > 0) {
    target_lesions = 1 + static_cast<int>(rng.below(spec.max_lesions));
  }
  ByteVol occupied = ByteVol::zeros(spec.volume);
  for (int li = 0; li < target_lesions; ++li) {
    // class under this condition (or the flat override)
    std::vector<double> w(spec.lesion_classes());
    for (int c = 0; c < spec.lesion_classes(); ++c) {
      w[c] = spec.flat_class_prior.empty()
                 ? spec.signatures[c].condition_affinity[static_cast<int>(pc.condition)]
                 : spec.flat_class_prior[c];
    }
    double total = 0;
    for (double x : w) total += x;
    if (total <= 0) continue;  // no class is admissible under this condition
    const int cls = sample_index(rng, w);
    const auto& sig = spec.signatures[cls];

    for (int attempt = 0; attempt < 25; ++attempt) {
      const auto center = liver_voxels[rng.below(liver_voxels.size())];
      const auto cz = center / (nx * ny), crem = center % (nx * ny);
      const auto cy = crem / nx, cx = crem % nx;
      Ellipsoid les{static_cast<double>(cx),
                    static_cast<double>(cy),
                    static_cast<double>(cz),
                    rng.uniform(spec.radius_xy_min, spec.radius_xy_max),
                    rng.uniform(spec.radius_xy_min, spec.radius_xy_max),
                    rng.uniform(spec.radius_z_min, spec.radius_z_max)};
      const std::int64_t x0 = std::max<std::int64_t>(0, cx - std::llround(les.ax) - 1);
      const std::int64_t x1 = std::min<std::int64_t>(nx - 1, cx + std::llround(les.ax) + 1);
      const std::int64_t y0 = std::max<std::int64_t>(0, cy - std::llround(les.ay) - 1);
      const std::int64_t y1 = std::min<std::int64_t>(ny - 1, cy + std::llround(les.ay) + 1);
      const std::int64_t z0 = std::max<std::int64_t>(0, cz - std::llround(les.az) - 1);
      const std::int64_t z1 = std::min<std::int64_t>(nz - 1, cz + std::llround(les.az) + 1);

      ByteVol mask = ByteVol::zeros(spec.volume);
      bool collision = false;
      std::int64_t voxels = 0;
      for (std::int64_t z = z0; z <= z1 && !collision; ++z) {
        for (std::int64_t y = y0; y <= y1 && !collision; ++y) {
          for (std::int64_t x = x0; x <= x1 && !collision; ++x) {
            const auto idx = pc.volume.index(x, y, z);
            if (les.rho(x, y, z) <= 1.0 && pc.liver.v[idx]) {
              if (occupied.v[idx]) {
                collision = true;
              } else {
                mask.v[idx] = 1;
                ++voxels;
              }
            }
          }
        }
      }
      if (collision || voxels < 20) continue;
      mask = largest_component(mask);
      if (mask.count() < 20) continue;

      // paint: offset + class texture, soft or hard boundary
      const double p1 = rng.uniform(0, 6.28), p2 = rng.uniform(0, 6.28);
      for (std::int64_t z = z0; z <= z1; ++z) {
        for (std::int64_t y = y0; y <= y1; ++y) {
          for (std::int64_t x = x0; x <= x1; ++x) {
            const auto idx = pc.volume.index(x, y, z);
            if (!mask.v[idx]) continue;
            double edge = 1.0;
            if (sig.boundary_soft > 0) {
              const double r = les.rho(x, y, z);
              edge = 1.0 / (1.0 + std::exp((r - 0.75) * 4.0 / sig.boundary_soft));
            }
            const double tex = sig.texture_amp * std::sin(sig.texture_freq * x + p1) *
                               std::sin(sig.texture_freq * y + p2);
            pc.volume.v[idx] += static_cast<float>(edge * (sig.intensity_offset + tex));
            occupied.v[idx] = 1;
          }
        }
      }
      pc.lesions.push_back(Lesion{std::move(mask), cls, sig.malignant});
      break;
    }
  }

  pc.has_tumor = !pc.lesions.empty();
  for (const auto& l : pc.lesions) pc.has_malignant = pc.has_malignant || l.malignant;
  return pc;
}

}  // namespace plus::data
