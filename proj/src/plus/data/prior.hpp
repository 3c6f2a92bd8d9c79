#pragma once

#include "plus/data/phantom.hpp"

namespace plus::data {

// Mock segmentation-prior provider: emits per-lesion candidate masks and
// prior class logits with controllable corruption, standing in for a
// pre-trained segmentation model. Deterministic per (case id, seed).
struct Corruption {
  int mask_jitter = 0;          // max morphological dilate/erode steps
  double logit_accuracy = 1.0;  // P(argmax prior == true class)
  double fp_rate = 0.0;         // expected false-positive candidates per case
  double fn_rate = 0.0;         // per-lesion drop probability

  void validate() const {
    if (mask_jitter < 0) throw ConfigError("mask jitter must be >= 0");
    for (double r : {logit_accuracy, fn_rate}) {
      if (r < 0 || r > 1) throw ConfigError("corruption rates must lie in [0,1]");
    }
    if (fp_rate < 0) throw ConfigError("fp rate must be >= 0");
  }
};

PriorSet mock_prior_provider(const PatientCase& pc, const Corruption& corruption,
                             int total_classes, std::uint64_t seed);

// 6-connected morphological helpers (exposed for tests)
ByteVol dilate6(const ByteVol& mask, int steps);
ByteVol erode6(const ByteVol& mask, int steps);

}  // namespace plus::data
