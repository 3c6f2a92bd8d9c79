#pragma once

#include <optional>

#include "plus/data/case.hpp"

namespace plus::eval {

// Lesion matching, detection/classification scores, patient-level diagnosis
// metrics, ROC-AUC, confusion matrices. Pure functions over plain values.

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (candidate, gt)
  std::vector<double> iou;                 // per pair
  std::vector<int> unmatched_candidates;   // FP indices
  std::vector<int> unmatched_gt;           // FN indices
};

double mask_iou(const data::ByteVol& a, const data::ByteVol& b);

// greedy descending-IoU matching; a pair is accepted iff IoU >= threshold
// and both sides are still unmatched
MatchResult match_lesions(const std::vector<const data::ByteVol*>& candidates,
                          const std::vector<const data::ByteVol*>& gts, double iou_threshold);

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0;
};

Prf prf_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);

// Detection P/R/F1: a matched pair is a TP iff the candidate's predicted
// class equals the GT class; candidates predicted non-lesion count as no
// detection at all.
Prf detection_prf(const MatchResult& match, const std::vector<int>& candidate_classes,
                  const std::vector<int>& gt_classes, int non_lesion_class);

struct BinaryCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  double accuracy() const {
    const auto total = tp + fp + fn + tn;
    return total ? static_cast<double>(tp + tn) / total : 0.0;
  }
};

BinaryCounts binary_counts(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold);

// Mann-Whitney AUC (ties count 0.5); throws when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// entry (g, p) counts items with ground truth g predicted p
std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& pred,
                                                        const std::vector<int>& gt, int classes);

// one-vs-rest macro F1 over the listed classes
double macro_f1(const std::vector<int>& pred, const std::vector<int>& gt,
                const std::vector<int>& classes);

struct RocPoint {
  double threshold, tpr, fpr;
};

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

// Full evaluation report (serialized by eval/report)
struct MetricsReport {
  Prf lesion_detection;
  double lesion_accuracy_matched = 0.0;       // refined argmax on matched pairs
  double prior_accuracy_matched = 0.0;        // prior argmax on the same pairs
  double lesion_macro_f1 = 0.0;               // classification macro-F1, matched pairs
  Prf patient_malignant;
  Prf patient_benign;
  Prf screening;
  double screening_accuracy = 0.0;
  std::vector<double> per_class_auc;          // one-vs-rest on matched pairs; NaN if undefined
  std::vector<std::vector<std::int64_t>> confusion;  // lesion classes, matched pairs
  std::int64_t matched = 0, candidates = 0, gt_lesions = 0, patients = 0, skipped_cases = 0;
  std::vector<RocPoint> screening_roc;
};

}  // namespace plus::eval
