#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "plus/core/error.hpp"

namespace plus::data {

// Volumes are stored x-fastest: index(x, y, z) = (z * ny + y) * nx + x.
// dims = {nx, ny, nz}; spacing in mm per axis.

struct ByteVol {
  std::array<std::int64_t, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> v;

  std::int64_t numel() const { return dims[0] * dims[1] * dims[2]; }
  std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return (z * dims[1] + y) * dims[0] + x;
  }
  bool at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return v[index(x, y, z)] != 0;
  }
  std::int64_t count() const {
    std::int64_t n = 0;
    for (auto b : v) n += b != 0;
    return n;
  }
  static ByteVol zeros(std::array<std::int64_t, 3> dims) {
    ByteVol m;
    m.dims = dims;
    m.v.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0);
    return m;
  }
};

struct FloatVol {
  std::array<std::int64_t, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<float> v;

  std::int64_t numel() const { return dims[0] * dims[1] * dims[2]; }
  std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return (z * dims[1] + y) * dims[0] + x;
  }
  static FloatVol zeros(std::array<std::int64_t, 3> dims) {
    FloatVol f;
    f.dims = dims;
    f.v.assign(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0.f);
    return f;
  }
};

enum class LiverCondition { normal, steatosis, cirrhosis };

inline const char* condition_name(LiverCondition c) {
  switch (c) {
    case LiverCondition::normal: return "normal";
    case LiverCondition::steatosis: return "steatosis";
    case LiverCondition::cirrhosis: return "cirrhosis";
  }
  return "?";
}

inline LiverCondition condition_from_name(const std::string& s) {
  if (s == "normal") return LiverCondition::normal;
  if (s == "steatosis") return LiverCondition::steatosis;
  if (s == "cirrhosis") return LiverCondition::cirrhosis;
  throw DataError("unknown liver condition: " + s);
}

struct Lesion {
  ByteVol mask;
  int cls = 0;
  bool malignant = false;
};

struct PatientCase {
  std::string id;
  FloatVol volume;
  ByteVol liver;
  std::vector<Lesion> lesions;
  bool has_malignant = false;  // Y
  bool has_tumor = false;      // y
  LiverCondition condition = LiverCondition::normal;
  std::uint64_t seed = 0;
};

// Candidate emitted by the mock segmentation prior: a mask, per-class prior
// logits, and (bookkeeping only) the ground-truth lesion it derives from.
struct PriorCandidate {
  ByteVol mask;
  std::vector<double> logits;
  int matched_gt = -1;  // -1 for false-positive candidates
};

struct PriorSet {
  std::vector<PriorCandidate> candidates;
};

}  // namespace plus::data
