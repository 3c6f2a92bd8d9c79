#include "plus/pipeline/config.hpp"

#include <fstream>

#include <json.hpp>

#include "plus/model/encoders.hpp"

namespace plus::pipeline {

using nlohmann::json;

namespace {

train::ClassKind kind_from_name(const std::string& s) {
  if (s == "malignant") return train::ClassKind::malignant;
  if (s == "benign") return train::ClassKind::benign;
  if (s == "non_lesion") return train::ClassKind::non_lesion;
  throw ConfigError("unknown class kind: " + s);
}

std::array<std::int64_t, 3> triple(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

}  // namespace

void RunConfig::validate() const {
  if (dim < 1 || heads < 1 || dim % heads != 0) {
    throw ConfigError("model dim must be positive and divisible by heads");
  }
  if (enc_widths.size() != 3) throw ConfigError("enc_widths must list 3 stage widths");
  for (auto w : enc_widths) {
    if (w < 1) throw ConfigError("encoder widths must be positive");
  }
  for (auto e : roi) {
    if (e < 8) throw ConfigError("roi extents must be >= 8");
  }
  for (auto e : liver_grid) {
    if (e < 8) throw ConfigError("liver grid extents must be >= 8");
  }
  if (classes < 3) throw ConfigError("need >= 2 lesion classes plus non-lesion");
  if (static_cast<int>(class_partition.size()) != classes) {
    throw ConfigError("class_partition size must equal classes");
  }
  bool has_nonlesion = false;
  for (const auto& k : class_partition) has_nonlesion |= k == "non_lesion";
  if (class_partition.back() != "non_lesion" || !has_nonlesion) {
    throw ConfigError("the last class must be the non_lesion class");
  }
  if (alpha < 0 || beta < 0 || alpha + beta > 1.0) {
    throw ConfigError("loss weights require alpha, beta >= 0 and alpha + beta <= 1");
  }
  if (!class_weights.empty() && static_cast<int>(class_weights.size()) != classes) {
    throw ConfigError("class_weights size must equal classes");
  }
  if (lr <= 0 || min_lr < 0 || min_lr > lr) throw ConfigError("invalid learning rates");
  if (batch_patients < 1 || epochs < 1) throw ConfigError("invalid batch size or epochs");
  prior.validate();
  if (precision != "f32" && precision != "f64") {
    throw ConfigError("precision must be f32 or f64");
  }
  if (iou_threshold <= 0 || iou_threshold > 1) throw ConfigError("invalid iou threshold");
  if (decision_threshold <= 0 || decision_threshold >= 1) {
    throw ConfigError("invalid decision threshold");
  }
  if (hda_scales.empty()) throw ConfigError("need at least one hda scale grid");
  const auto map = liver_map_dims();
  for (const auto& g : hda_scales) {
    const auto gz = zyx(g);
    for (int i = 0; i < 3; ++i) {
      if (gz[i] < 1 || gz[i] > map[i]) {
        throw ConfigError("hda scale grid exceeds the liver feature map (" +
                          std::to_string(map[2]) + "x" + std::to_string(map[1]) + "x" +
                          std::to_string(map[0]) + " xyz-reversed)");
      }
    }
  }
  const auto rmap = roi_map_dims();
  if (rmap[0] < 1 || rmap[1] < 2 || rmap[2] < 2) {
    throw ConfigError("roi too small for the lesion token grid (needs map >= 2x2x1)");
  }
}

train::LossConfig RunConfig::loss_config() const {
  train::LossConfig lc;
  lc.alpha = alpha;
  lc.beta = beta;
  lc.gamma = gamma;
  lc.screening_q_tumor_sum = screening_q_tumor_sum;
  lc.distill_weight = distill_weight;
  for (const auto& k : class_partition) lc.class_kind.push_back(kind_from_name(k));
  if (class_weights.empty()) {
    throw ConfigError("class weights not resolved yet (computed from the train split)");
  }
  lc.class_weights = class_weights;
  return lc;
}

std::array<std::int64_t, 3> RunConfig::liver_map_dims() const {
  return model::encoder_map_dims(zyx(liver_grid));
}

std::array<std::int64_t, 3> RunConfig::roi_map_dims() const {
  return model::encoder_map_dims(zyx(roi));
}

std::string RunConfig::to_json() const {
  json scales = json::array();
  for (const auto& g : hda_scales) scales.push_back({g[0], g[1], g[2]});
  json j = {
      {"model",
       {{"dim", dim},
        {"heads", heads},
        {"enc_widths", enc_widths},
        {"roi", {roi[0], roi[1], roi[2]}},
        {"liver_grid", {liver_grid[0], liver_grid[1], liver_grid[2]}},
        {"hda_scales", scales},
        {"use_hda", use_hda},
        {"classes", classes},
        {"class_partition", class_partition}}},
      {"loss",
       {{"alpha", alpha},
        {"beta", beta},
        {"gamma", gamma},
        {"class_weights", class_weights},
        {"screening_q",
         screening_q_tumor_sum ? std::string("tumor_sum") : std::string("concat_max")},
        {"distill_weight", distill_weight}}},
      {"optim",
       {{"lr", lr},
        {"weight_decay", weight_decay},
        {"batch_patients", batch_patients},
        {"epochs", epochs},
        {"min_lr", min_lr}}},
      {"prior",
       {{"mask_jitter", prior.mask_jitter},
        {"logit_accuracy", prior.logit_accuracy},
        {"fp_rate", prior.fp_rate},
        {"fn_rate", prior.fn_rate}}},
      {"seeds", {{"init", seed_init}, {"order", seed_order}, {"prior", seed_prior}}},
      {"precision", precision},
      {"fusion", model::fusion_name(fusion)},
      {"eval",
       {{"iou_threshold", iou_threshold}, {"decision_threshold", decision_threshold}}},
      {"data_dir", data_dir},
  };
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("model")) {
      const auto& m = j["model"];
      if (m.contains("dim")) c.dim = m["dim"].get<std::int64_t>();
      if (m.contains("heads")) c.heads = m["heads"].get<std::int64_t>();
      if (m.contains("enc_widths")) {
        c.enc_widths = m["enc_widths"].get<std::vector<std::int64_t>>();
      }
      if (m.contains("roi")) c.roi = triple(m["roi"]);
      if (m.contains("liver_grid")) c.liver_grid = triple(m["liver_grid"]);
      if (m.contains("hda_scales")) {
        c.hda_scales.clear();
        for (const auto& g : m["hda_scales"]) c.hda_scales.push_back(triple(g));
      }
      if (m.contains("use_hda")) c.use_hda = m["use_hda"].get<bool>();
      if (m.contains("classes")) c.classes = m["classes"].get<int>();
      if (m.contains("class_partition")) {
        c.class_partition = m["class_partition"].get<std::vector<std::string>>();
      }
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      if (l.contains("alpha")) c.alpha = l["alpha"].get<double>();
      if (l.contains("beta")) c.beta = l["beta"].get<double>();
      if (l.contains("gamma")) c.gamma = l["gamma"].get<double>();
      if (l.contains("class_weights")) {
        c.class_weights = l["class_weights"].get<std::vector<double>>();
      }
      if (l.contains("screening_q")) {
        const auto s = l["screening_q"].get<std::string>();
        if (s != "concat_max" && s != "tumor_sum") {
          throw ConfigError("screening_q must be concat_max or tumor_sum");
        }
        c.screening_q_tumor_sum = s == "tumor_sum";
      }
      if (l.contains("distill_weight")) c.distill_weight = l["distill_weight"].get<double>();
    }
    if (j.contains("optim")) {
      const auto& o = j["optim"];
      if (o.contains("lr")) c.lr = o["lr"].get<double>();
      if (o.contains("weight_decay")) c.weight_decay = o["weight_decay"].get<double>();
      if (o.contains("batch_patients")) c.batch_patients = o["batch_patients"].get<int>();
      if (o.contains("epochs")) c.epochs = o["epochs"].get<int>();
      if (o.contains("min_lr")) c.min_lr = o["min_lr"].get<double>();
    }
    if (j.contains("prior")) {
      const auto& p = j["prior"];
      if (p.contains("mask_jitter")) c.prior.mask_jitter = p["mask_jitter"].get<int>();
      if (p.contains("logit_accuracy")) {
        c.prior.logit_accuracy = p["logit_accuracy"].get<double>();
      }
      if (p.contains("fp_rate")) c.prior.fp_rate = p["fp_rate"].get<double>();
      if (p.contains("fn_rate")) c.prior.fn_rate = p["fn_rate"].get<double>();
    }
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      if (s.contains("init")) c.seed_init = s["init"].get<std::uint64_t>();
      if (s.contains("order")) c.seed_order = s["order"].get<std::uint64_t>();
      if (s.contains("prior")) c.seed_prior = s["prior"].get<std::uint64_t>();
    }
    if (j.contains("precision")) c.precision = j["precision"].get<std::string>();
    if (j.contains("fusion")) c.fusion = model::fusion_from_name(j["fusion"].get<std::string>());
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      if (e.contains("iou_threshold")) c.iou_threshold = e["iou_threshold"].get<double>();
      if (e.contains("decision_threshold")) {
        c.decision_threshold = e["decision_threshold"].get<double>();
      }
    }
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace plus::pipeline
