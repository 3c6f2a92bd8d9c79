#pragma once

#include <filesystem>
#include <map>

#include "plus/data/case.hpp"

namespace plus::data {

// On-disk dataset layout: one directory per case with
//   volume.raw      little-endian float32, x-fastest
//   liver_mask.raw  bytes 0/1
//   lesion_<k>.raw  bytes 0/1, one per ground-truth lesion
//   meta.json       shape, spacing, lesion classes, labels, split, seed
// and a top-level manifest.json listing case ids per split.

struct Manifest {
  std::map<std::string, std::vector<std::string>> splits;

  const std::vector<std::string>& ids(const std::string& split) const;
};

void save_case(const std::filesystem::path& root, const PatientCase& pc,
               const std::string& split);
PatientCase load_case(const std::filesystem::path& root, const std::string& id);

void save_manifest(const std::filesystem::path& root, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& root);

// raw helpers (also used by saliency export)
void write_f32_raw(const std::filesystem::path& file, const FloatVol& vol);
FloatVol read_f32_raw(const std::filesystem::path& file, std::array<std::int64_t, 3> dims,
                      std::array<double, 3> spacing);
void write_mask_raw(const std::filesystem::path& file, const ByteVol& mask);
ByteVol read_mask_raw(const std::filesystem::path& file, std::array<std::int64_t, 3> dims);

}  // namespace plus::data
