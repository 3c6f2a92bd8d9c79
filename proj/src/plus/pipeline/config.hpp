#pragma once

#include <array>
#include <string>
#include <vector>

#include "plus/data/prior.hpp"
#include "plus/model/gpr.hpp"
#include "plus/train/losses.hpp"

namespace plus::pipeline {

// Run configuration. Spatial triples are written (x, y, z) in configs and
// converted to tensor (z, y, x) order at the call sites.
struct RunConfig {
  // model
  std::int64_t dim = 128;
  std::int64_t heads = 4;
  std::vector<std::int64_t> enc_widths{16, 32, 64};
  std::array<std::int64_t, 3> roi{32, 32, 8};          // paper preset: 64 x 64 x 16
  std::array<std::int64_t, 3> liver_grid{64, 64, 32};  // fixed encoder input grid
  std::vector<std::array<std::int64_t, 3>> hda_scales{
      {1, 1, 1}, {2, 2, 2}, {4, 4, 4}, {8, 8, 4}};
  bool use_hda = true;
  int classes = 5;
  std::vector<std::string> class_partition{"malignant", "malignant", "benign", "benign",
                                           "non_lesion"};

  // loss
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 2.0;
  std::vector<double> class_weights;  // empty = inverse frequency from the train split
  bool screening_q_tumor_sum = false;
  double distill_weight = 0.3;

  // optimizer / schedule
  double lr = 1e-4;
  double weight_decay = 0.05;
  int batch_patients = 2;
  int epochs = 100;
  double min_lr = 0.0;

  // prior corruption (shared by train and eval; eval seeds are frozen)
  data::Corruption prior{1, 0.7, 0.5, 0.05};

  // seeds
  std::uint64_t seed_init = 1;
  std::uint64_t seed_order = 2;
  std::uint64_t seed_prior = 3;

  std::string precision = "f32";  // f32 | f64
  model::Fusion fusion = model::Fusion::gpr;

  // evaluation
  double iou_threshold = 0.3;
  double decision_threshold = 0.5;

  // resolved at train time and stored in checkpoints
  std::string data_dir;

  void validate() const;
  train::LossConfig loss_config() const;  // class_weights must be resolved
  std::array<std::int64_t, 3> liver_map_dims() const;
  std::array<std::int64_t, 3> roi_map_dims() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

inline std::array<std::int64_t, 3> zyx(const std::array<std::int64_t, 3>& xyz) {
  return {xyz[2], xyz[1], xyz[0]};
}

}  // namespace plus::pipeline
