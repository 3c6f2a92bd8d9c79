#pragma once

#include <ostream>

#include "plus/data/volume_io.hpp"
#include "plus/eval/metrics.hpp"
#include "plus/pipeline/forward.hpp"

namespace plus::pipeline {

// Split evaluation: runs the forward pass per case with frozen prior
// corruption seeds, matches candidates to ground truth by IoU, and fills the
// metrics report. Cases whose prior provider emits no candidates cannot be
// forwarded; they still count at patient level with all-zero scores (a
// candidate-free case screens negative).

template <typename T>
eval::MetricsReport evaluate_split(const Model<T>& m, const std::filesystem::path& data_dir,
                                   const std::string& split, std::ostream* log = nullptr) {
  const auto manifest = data::load_manifest(data_dir);
  const auto& ids = manifest.ids(split);
  if (ids.empty()) throw DataError("split '" + split + "' is empty");

  const auto& cfg = m.cfg;
  const auto lc = cfg.loss_config();
  const int non_lesion = cfg.classes - 1;

  eval::MetricsReport rep;
  rep.per_class_auc.assign(cfg.classes, std::nan(""));
  std::vector<int> matched_pred, matched_prior, matched_gt_cls;
  std::vector<std::vector<double>> matched_probs;  // per matched pair, C probs
  std::vector<double> malig_scores, benign_scores, screen_scores;
  std::vector<int> malig_labels, benign_labels, screen_labels;
  std::int64_t det_tp = 0, det_fp = 0, det_fn = 0;

  for (const auto& id : ids) {
    const auto pc = data::load_case(data_dir, id);
    const auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
    ++rep.patients;
    rep.gt_lesions += static_cast<std::int64_t>(pc.lesions.size());

    bool has_benign_gt = false;
    for (const auto& l : pc.lesions) has_benign_gt |= !l.malignant;
    malig_labels.push_back(pc.has_malignant ? 1 : 0);
    benign_labels.push_back(has_benign_gt ? 1 : 0);
    screen_labels.push_back(pc.has_tumor ? 1 : 0);

    if (priors.candidates.empty()) {
      ++rep.skipped_cases;
      det_fn += static_cast<std::int64_t>(pc.lesions.size());
      malig_scores.push_back(0.0);
      benign_scores.push_back(0.0);
      screen_scores.push_back(0.0);
      if (log) *log << "note: case " << id << " has no candidates; screens negative\n";
      continue;
    }

    const auto fwd = forward_case(m, pc, priors);
    const auto b = fwd.probs.dim(0);
    rep.candidates += b;

    // per-candidate class mass and argmax
    std::vector<int> cand_argmax(b);
    std::vector<double> cand_pm(b, 0.0), cand_pb(b, 0.0);
    for (std::int64_t i = 0; i < b; ++i) {
      int best = 0;
      for (int c = 1; c < cfg.classes; ++c) {
        if (fwd.probs.at({i, c}) > fwd.probs.at({i, best})) best = c;
      }
      cand_argmax[i] = best;
      for (int c = 0; c < cfg.classes; ++c) {
        const double p = fwd.probs.at({i, c});
        if (lc.class_kind[c] == train::ClassKind::malignant) cand_pm[i] += p;
        if (lc.class_kind[c] == train::ClassKind::benign) cand_pb[i] += p;
      }
    }

    // patient scores
    double pm = 0, pb = 0, q = 0;
    for (std::int64_t i = 0; i < b; ++i) {
      pm = std::max(pm, cand_pm[i]);
      pb = std::max(pb, cand_pb[i]);
      q = std::max(q, cfg.screening_q_tumor_sum ? cand_pm[i] + cand_pb[i]
                                                : std::max(cand_pm[i], cand_pb[i]));
    }
    malig_scores.push_back(pm);
    benign_scores.push_back(pb);
    screen_scores.push_back(q);

    // lesion-level matching on masks
    std::vector<const data::ByteVol*> cand_masks, gt_masks;
    for (const auto& c : priors.candidates) cand_masks.push_back(&c.mask);
    for (const auto& l : pc.lesions) gt_masks.push_back(&l.mask);
    const auto match = eval::match_lesions(cand_masks, gt_masks, cfg.iou_threshold);
    std::vector<int> gt_classes;
    for (const auto& l : pc.lesions) gt_classes.push_back(l.cls);
    const auto prf = eval::detection_prf(match, cand_argmax, gt_classes, non_lesion);
    det_tp += prf.tp;
    det_fp += prf.fp;
    det_fn += prf.fn;

    for (auto [ci, gi] : match.pairs) {
      matched_pred.push_back(cand_argmax[ci]);
      matched_gt_cls.push_back(gt_classes[gi]);
      int prior_best = 0;
      for (int c = 1; c < cfg.classes; ++c) {
        if (priors.candidates[ci].logits[c] > priors.candidates[ci].logits[prior_best]) {
          prior_best = c;
        }
      }
      matched_prior.push_back(prior_best);
      std::vector<double> row(cfg.classes);
      for (int c = 0; c < cfg.classes; ++c) row[c] = fwd.probs.at({ci, c});
      matched_probs.push_back(std::move(row));
    }
  }

  rep.matched = static_cast<std::int64_t>(matched_pred.size());
  rep.lesion_detection = eval::prf_from_counts(det_tp, det_fp, det_fn);
  if (rep.matched > 0) {
    std::int64_t ok = 0, prior_ok = 0;
    for (std::size_t i = 0; i < matched_pred.size(); ++i) {
      ok += matched_pred[i] == matched_gt_cls[i];
      prior_ok += matched_prior[i] == matched_gt_cls[i];
    }
    rep.lesion_accuracy_matched = static_cast<double>(ok) / rep.matched;
    rep.prior_accuracy_matched = static_cast<double>(prior_ok) / rep.matched;
    std::vector<int> lesion_classes;
    for (int c = 0; c < non_lesion; ++c) lesion_classes.push_back(c);
    rep.lesion_macro_f1 = eval::macro_f1(matched_pred, matched_gt_cls, lesion_classes);
    rep.confusion = eval::confusion_matrix(matched_pred, matched_gt_cls, cfg.classes);
    for (int c = 0; c < cfg.classes; ++c) {
      std::vector<double> scores;
      std::vector<int> labels;
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < matched_probs.size(); ++i) {
        scores.push_back(matched_probs[i][c]);
        labels.push_back(matched_gt_cls[i] == c ? 1 : 0);
        (labels.back() ? pos : neg) = true;
      }
      if (pos && neg) rep.per_class_auc[c] = eval::roc_auc(scores, labels);
    }
  } else {
    rep.confusion = eval::confusion_matrix({}, {}, cfg.classes);
  }

  const auto mc = eval::binary_counts(malig_scores, malig_labels, cfg.decision_threshold);
  rep.patient_malignant = eval::prf_from_counts(mc.tp, mc.fp, mc.fn);
  const auto bc = eval::binary_counts(benign_scores, benign_labels, cfg.decision_threshold);
  rep.patient_benign = eval::prf_from_counts(bc.tp, bc.fp, bc.fn);
  const auto sc = eval::binary_counts(screen_scores, screen_labels, cfg.decision_threshold);
  rep.screening = eval::prf_from_counts(sc.tp, sc.fp, sc.fn);
  rep.screening_accuracy = sc.accuracy();
  rep.screening_roc = eval::roc_points(screen_scores, screen_labels);
  return rep;
}

}  // namespace plus::pipeline
