#include "plus/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace plus::eval {

double mask_iou(const data::ByteVol& a, const data::ByteVol& b) {
  if (a.dims != b.dims) {
    throw ShapeError("mask_iou: mask dims differ");
  }
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const bool av = a.v[i] != 0, bv = b.v[i] != 0;
    inter += av && bv;
    uni += av || bv;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

MatchResult match_lesions(const std::vector<const data::ByteVol*>& candidates,
                          const std::vector<const data::ByteVol*>& gts, double iou_threshold) {
  if (iou_threshold <= 0 || iou_threshold > 1) {
    throw ContractError("iou threshold must lie in (0, 1]");
  }
  struct Entry {
    double iou;
    int cand, gt;
  };
  std::vector<Entry> entries;
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      const double iou = mask_iou(*candidates[c], *gts[g]);
      if (iou >= iou_threshold) entries.push_back({iou, c, g});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.iou > b.iou; });
  MatchResult out;
  std::vector<bool> cand_used(candidates.size(), false), gt_used(gts.size(), false);
  for (const auto& e : entries) {
    if (cand_used[e.cand] || gt_used[e.gt]) continue;
    cand_used[e.cand] = true;
    gt_used[e.gt] = true;
    out.pairs.emplace_back(e.cand, e.gt);
    out.iou.push_back(e.iou);
  }
  for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
    if (!cand_used[c]) out.unmatched_candidates.push_back(c);
  }
  for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
    if (!gt_used[g]) out.unmatched_gt.push_back(g);
  }
  return out;
}

Prf prf_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  Prf r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
  return r;
}

Prf detection_prf(const MatchResult& match, const std::vector<int>& candidate_classes,
                  const std::vector<int>& gt_classes, int non_lesion_class) {
  std::int64_t tp = 0;
  std::int64_t detections = 0;
  for (int cls : candidate_classes) detections += cls != non_lesion_class;
  for (std::size_t p = 0; p < match.pairs.size(); ++p) {
    const auto [c, g] = match.pairs[p];
    if (candidate_classes.at(c) != non_lesion_class &&
        candidate_classes.at(c) == gt_classes.at(g)) {
      ++tp;
    }
  }
  const std::int64_t fp = detections - tp;
  const std::int64_t fn = static_cast<std::int64_t>(gt_classes.size()) - tp;
  return prf_from_counts(tp, fp, fn);
}

BinaryCounts binary_counts(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold) {
  if (scores.size() != labels.size()) throw ContractError("score/label size mismatch");
  BinaryCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++c.tp;
    if (pred && !labels[i]) ++c.fp;
    if (!pred && labels[i]) ++c.fn;
    if (!pred && !labels[i]) ++c.tn;
  }
  return c;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ContractError("score/label size mismatch");
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw ContractError("roc_auc undefined: only one class present");
  }
  // average ranks (ties averaged) == Mann-Whitney with 0.5 per tie
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (labels[k]) rank_sum_pos += rank[k];
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& pred,
                                                        const std::vector<int>& gt,
                                                        int classes) {
  if (pred.size() != gt.size()) throw ContractError("pred/gt size mismatch");
  std::vector<std::vector<std::int64_t>> m(classes, std::vector<std::int64_t>(classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= classes || gt[i] < 0 || gt[i] >= classes) {
      throw ContractError("class id out of range in confusion_matrix");
    }
    m[gt[i]][pred[i]] += 1;
  }
  return m;
}

double macro_f1(const std::vector<int>& pred, const std::vector<int>& gt,
                const std::vector<int>& classes) {
  if (pred.size() != gt.size()) throw ContractError("pred/gt size mismatch");
  double sum = 0;
  for (int c : classes) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gt[i] == c) ++tp;
      if (pred[i] == c && gt[i] != c) ++fp;
      if (pred[i] != c && gt[i] == c) ++fn;
    }
    sum += prf_from_counts(tp, fp, fn).f1;
  }
  return classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::vector<RocPoint> pts;
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return pts;
  for (double t : thresholds) {
    const auto c = binary_counts(scores, labels, t);
    pts.push_back({t, static_cast<double>(c.tp) / pos, static_cast<double>(c.fp) / neg});
  }
  return pts;
}

}  // namespace plus::eval
