#pragma once

#include <iomanip>
#include <iostream>

#include "plus/model/gpr.hpp"
#include "plus/pipeline/checkpoint.hpp"
#include "plus/pipeline/evaluate.hpp"

namespace plus::pipeline {

struct EpochRow {
  int epoch = 0;
  double lesion = 0, patient = 0, screening = 0, total = 0, distill = 0;
  double lr = 0;
  double val_malig_f1 = std::nan("");
  double val_screen_acc = std::nan("");
  int skipped_cases = 0;
};

struct TrainOutput {
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  std::vector<EpochRow> log;
};

// Inverse-frequency class weights from the training split's candidate
// labels, normalized to mean 1.
inline std::vector<double> class_weights_from_split(const RunConfig& cfg,
                                                    const std::filesystem::path& data_dir,
                                                    const std::vector<std::string>& ids) {
  std::vector<std::int64_t> counts(cfg.classes, 0);
  std::int64_t total = 0;
  for (const auto& id : ids) {
    const auto pc = data::load_case(data_dir, id);
    const auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
    for (const auto& cand : priors.candidates) {
      const int cls = cand.matched_gt >= 0 ? pc.lesions[cand.matched_gt].cls : cfg.classes - 1;
      counts[cls] += 1;
      ++total;
    }
  }
  if (total == 0) throw DataError("training split produced no candidates");
  std::vector<double> w(cfg.classes);
  double sum = 0;
  for (int c = 0; c < cfg.classes; ++c) {
    w[c] = static_cast<double>(total) / (cfg.classes * std::max<std::int64_t>(counts[c], 1));
    sum += w[c];
  }
  for (auto& x : w) x *= cfg.classes / sum;  // mean 1
  return w;
}

template <typename T>
struct BatchTensors {
  Tensor<T> features;
  Tensor<T> priors;
  train::BatchLabels labels;
  int cases_used = 0;
};

// Assemble the lesion-union batch for a set of cases (already loaded, with
// priors). Cases without candidates are skipped.
template <typename T>
BatchTensors<T> assemble_batch(const Model<T>& m,
                               const std::vector<const data::PatientCase*>& cases,
                               const std::vector<const data::PriorSet*>& priors) {
  BatchTensors<T> out;
  std::vector<Tensor<T>> f_parts, p_parts;
  int row = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    if (priors[k]->candidates.empty()) continue;
    const auto& pc = *cases[k];
    auto vol = pc.volume;
    normalize_over_liver(vol, pc.liver);
    auto vt = volume_tensor<T>(vol);
    auto feats = encode_case(m, vt, pc.liver, *priors[k]);
    const int b = static_cast<int>(feats.matched_gt.size());
    f_parts.push_back(feats.features);
    p_parts.push_back(feats.prior_logits);
    for (int i = 0; i < b; ++i) {
      const int gt = feats.matched_gt[i];
      out.labels.lesion_class.push_back(gt >= 0 ? pc.lesions[gt].cls : m.cfg.classes - 1);
    }
    out.labels.patient_ranges.emplace_back(row, row + b);
    out.labels.patient_malignant.push_back(pc.has_malignant ? 1 : 0);
    out.labels.patient_has_tumor.push_back(pc.has_tumor ? 1 : 0);
    row += b;
    ++out.cases_used;
  }
  if (out.cases_used > 0) {
    out.features = f_parts.size() == 1 ? f_parts[0] : ops::concat(f_parts, 0);
    out.priors = p_parts.size() == 1 ? p_parts[0] : ops::concat(p_parts, 0);
  }
  return out;
}

template <typename T>
TrainOutput train_run(RunConfig cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, std::ostream& log) {
  cfg.validate();
  cfg.data_dir = data_dir.string();
  const auto manifest = data::load_manifest(data_dir);
  const auto& train_ids = manifest.ids("train");
  if (train_ids.empty()) throw DataError("empty train split");
  const bool has_val = manifest.splits.count("val") && !manifest.splits.at("val").empty();

  if (cfg.class_weights.empty()) {
    cfg.class_weights = class_weights_from_split(cfg, data_dir, train_ids);
    log << "class weights:";
    for (double w : cfg.class_weights) log << " " << std::setprecision(4) << w;
    log << "\n";
  }
  const auto lc = cfg.loss_config();
  const std::string config_json = cfg.to_json();

  Model<T> model(cfg);
  const auto n_batches =
      (train_ids.size() + cfg.batch_patients - 1) / cfg.batch_patients;
  typename train::AdamW<T>::Config ocfg;
  ocfg.base_lr = cfg.lr;
  ocfg.min_lr = cfg.min_lr;
  ocfg.weight_decay = cfg.weight_decay;
  ocfg.total_steps = static_cast<std::int64_t>(n_batches) * cfg.epochs;
  train::AdamW<T> opt(model.params, ocfg);

  std::filesystem::create_directories(out_dir);
  TrainOutput result;
  result.last_checkpoint = out_dir / "last.ckpt";
  result.best_checkpoint = out_dir / "best.ckpt";
  double best_f1 = -1.0;

  std::ofstream csv(out_dir / "train_log.csv");
  csv << "epoch,lesion_loss,patient_loss,screening_loss,total_loss,distill_loss,lr,"
         "val_malignant_f1,val_screening_acc,skipped_cases\n";

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::string> order = train_ids;
    Rng shuffle_rng(mix_seed(cfg.seed_order, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    EpochRow row;
    row.epoch = epoch;
    std::int64_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_patients) {
      const auto end = std::min(order.size(), start + cfg.batch_patients);
      std::vector<data::PatientCase> cases;
      std::vector<data::PriorSet> priors;
      for (std::size_t k = start; k < end; ++k) {
        cases.push_back(data::load_case(data_dir, order[k]));
        priors.push_back(
            data::mock_prior_provider(cases.back(), cfg.prior, cfg.classes, cfg.seed_prior));
        if (priors.back().candidates.empty()) {
          ++row.skipped_cases;
          log << "note: skipping case " << cases.back().id << " (no candidates)\n";
        }
      }
      std::vector<const data::PatientCase*> case_ptrs;
      std::vector<const data::PriorSet*> prior_ptrs;
      for (std::size_t k = 0; k < cases.size(); ++k) {
        case_ptrs.push_back(&cases[k]);
        prior_ptrs.push_back(&priors[k]);
      }

      Tape<T> tape;
      typename Tape<T>::Scope scope(tape);
      auto batch = assemble_batch(model, case_ptrs, prior_ptrs);
      if (batch.cases_used == 0) continue;

      auto probs = refine_and_classify(model, batch.features, batch.priors);
      auto ll = train::lesion_focal_loss(probs, batch.labels, lc);
      auto agg = train::patient_aggregate(probs, batch.labels, lc);
      auto lp = train::patient_diagnosis_loss(agg, batch.labels, lc);
      auto ls = train::screening_loss(agg, batch.labels, lc);
      auto total = train::total_loss(ll, lp, ls, lc);

      const double ll_v = ll.item(), lp_v = lp.item(), ls_v = ls.item();
      double total_v = total.item();
      const double contract =
          cfg.alpha * ll_v + cfg.beta * lp_v + (1.0 - cfg.alpha - cfg.beta) * ls_v;
      if (std::abs(total_v - contract) > 1e-6) {
        throw NumericError("loss-weight contract violated at epoch " +
                           std::to_string(epoch));
      }

      auto objective = total;
      double kl_v = 0.0;
      if (cfg.fusion == model::Fusion::distillation) {
        auto kl = model::distillation_kl(batch.priors, probs);
        kl_v = kl.item();
        objective = ops::add(total, ops::scale(kl, cfg.distill_weight));
      }
      if (!std::isfinite(total_v) || !std::isfinite(kl_v)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / cfg.batch_patients));
      }

      row.lr = opt.lr_at(opt.steps_done());
      tape.backward(objective);
      opt.step(model.params, tape);

      row.lesion += ll_v;
      row.patient += lp_v;
      row.screening += ls_v;
      row.total += total_v;
      row.distill += kl_v;
      ++steps;
    }
    if (steps > 0) {
      row.lesion /= steps;
      row.patient /= steps;
      row.screening /= steps;
      row.total /= steps;
      row.distill /= steps;
    }

    save_checkpoint(result.last_checkpoint, model.params, &opt, config_json, epoch);
    if (has_val) {
      const auto val = evaluate_split(model, data_dir, "val");
      row.val_malig_f1 = val.patient_malignant.f1;
      row.val_screen_acc = val.screening_accuracy;
      if (val.patient_malignant.f1 > best_f1) {
        best_f1 = val.patient_malignant.f1;
        save_checkpoint(result.best_checkpoint, model.params, &opt, config_json, epoch);
      }
    }

    log << "epoch " << epoch << " total " << std::setprecision(5) << row.total << " (L "
        << row.lesion << " P " << row.patient << " S " << row.screening << ")";
    if (has_val) log << " val_malig_f1 " << row.val_malig_f1;
    log << "\n";
    log.flush();
    csv << row.epoch << "," << row.lesion << "," << row.patient << "," << row.screening << ","
        << row.total << "," << row.distill << "," << row.lr << "," << row.val_malig_f1 << ","
        << row.val_screen_acc << "," << row.skipped_cases << "\n";
    csv.flush();
    result.log.push_back(row);
  }

  if (!has_val) {
    save_checkpoint(result.best_checkpoint, model.params, &opt, config_json, cfg.epochs - 1);
  }
  return result;
}

}  // namespace plus::pipeline
