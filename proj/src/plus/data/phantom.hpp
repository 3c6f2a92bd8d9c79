#pragma once

#include "plus/core/rng.hpp"
#include "plus/data/case.hpp"

namespace plus::data {

// Procedural volumetric patients: an ellipsoidal liver with a
// condition-dependent appearance (normal / steatosis-like low intensity /
// cirrhosis-like irregular border and rough texture) and 0..max_lesions
// ellipsoidal lesions whose intensity offset, internal texture, and boundary
// sharpness are class signatures. Class priors are conditioned on the liver
// condition, which is what makes global context informative.

struct ClassSignature {
  double intensity_offset = 0.0;
  double texture_amp = 0.0;
  double texture_freq = 0.0;   // radians per voxel
  double boundary_soft = 0.0;  // 0 = hard edge; larger = smoother falloff
  bool malignant = false;
  // unnormalized sampling weight under {normal, steatosis, cirrhosis}
  std::array<double, 3> condition_affinity{1.0, 1.0, 1.0};
};

struct GenSpec {
  std::array<std::int64_t, 3> volume{96, 96, 48};
  std::array<double, 3> spacing{1.0, 1.0, 2.0};
  int classes = 5;  // lesion classes + one non-lesion class
  std::vector<ClassSignature> signatures;
  std::array<double, 3> condition_prior{0.45, 0.25, 0.30};
  double healthy_fraction = 0.30;
  int max_lesions = 3;
  // overrides condition-dependent sampling with a flat prior when non-empty
  std::vector<double> flat_class_prior;
  // lesion geometry (voxels)
  double radius_xy_min = 4.0, radius_xy_max = 9.0;
  double radius_z_min = 2.0, radius_z_max = 4.0;

  int lesion_classes() const { return classes - 1; }
  void validate() const;
};

GenSpec default_gen_spec();

PatientCase generate_case(std::uint64_t seed, const GenSpec& spec);

// largest 26-connected component of a mask (generated lesions are connected)
ByteVol largest_component(const ByteVol& mask);

// mean voxel intensity inside a mask
double mean_intensity(const FloatVol& vol, const ByteVol& mask);

}  // namespace plus::data
