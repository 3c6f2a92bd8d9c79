#pragma once

#include <algorithm>

#include "plus/core/ops.hpp"

namespace plus::train {

enum class ClassKind { malignant, benign, non_lesion };

// Weights and class semantics for the tripartite objective
// L_total = alpha * L_L + beta * L_P + (1 - alpha - beta) * L_S.
struct LossConfig {
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 2.0;                  // focal exponent
  std::vector<double> class_weights;   // z_c, one per class
  std::vector<ClassKind> class_kind;   // partition over the C classes
  double prob_clamp = 1e-7;
  // screening score per lesion: max(p_malig, p_benign) by default, or the
  // total tumor mass p_malig + p_benign behind this switch
  bool screening_q_tumor_sum = false;
  double distill_weight = 0.3;

  std::int64_t classes() const { return static_cast<std::int64_t>(class_kind.size()); }

  void validate() const {
    if (alpha < 0 || beta < 0 || alpha + beta > 1.0) {
      throw ConfigError("loss weights require alpha, beta >= 0 and alpha + beta <= 1");
    }
    if (class_kind.empty()) throw ConfigError("empty class partition");
    if (class_weights.size() != class_kind.size()) {
      throw ConfigError("class_weights size must equal class count");
    }
    for (double z : class_weights) {
      if (!(z > 0)) throw ConfigError("class weights must be positive");
    }
  }
};

// Lesion rows are grouped per patient as contiguous [begin, end) ranges.
struct BatchLabels {
  std::vector<int> lesion_class;                        // per candidate row
  std::vector<std::pair<int, int>> patient_ranges;      // into candidate rows
  std::vector<int> patient_malignant;                   // Y_j
  std::vector<int> patient_has_tumor;                   // y_j

  int patients() const { return static_cast<int>(patient_ranges.size()); }

  void validate(std::int64_t rows, std::int64_t classes) const {
    if (patient_ranges.empty()) throw ContractError("batch without patients");
    if (static_cast<std::int64_t>(lesion_class.size()) != rows) {
      throw ContractError("lesion_class size does not match probability rows");
    }
    if (patient_malignant.size() != patient_ranges.size() ||
        patient_has_tumor.size() != patient_ranges.size()) {
      throw ContractError("patient label arrays misaligned");
    }
    std::int64_t covered = 0;
    for (const auto& [b, e] : patient_ranges) {
      if (e <= b) throw ContractError("empty patient group");
      covered += e - b;
    }
    if (covered != rows) throw ContractError("patient groups do not partition the batch");
    for (int c : lesion_class) {
      if (c < 0 || c >= classes) throw ContractError("lesion class out of range");
    }
  }
};

// Per-patient tape tensors [M]: max malignant prob, max benign prob, and the
// screening score q.
template <typename T>
struct PatientAggregates {
  Tensor<T> p_malig;
  Tensor<T> p_benign;
  Tensor<T> q;
};

namespace detail {

template <typename T>
Tensor<T> kind_column(const LossConfig& cfg, ClassKind kind) {
  std::vector<T> col(cfg.classes());
  for (std::int64_t c = 0; c < cfg.classes(); ++c) {
    col[c] = cfg.class_kind[c] == kind ? T(1) : T(0);
  }
  return Tensor<T>({cfg.classes(), 1}, std::move(col));
}

// Mean of a 1-D tensor summed in ascending value order, so equal multisets
// of addends produce bit-identical results: losses stay exactly invariant
// under lesion/patient permutations. Gradient is uniform 1/n regardless.
template <typename T>
Tensor<T> ordered_mean(const Tensor<T>& v) {
  const auto n = v.dim(0);
  if (n == 1) return v;
  std::vector<std::int64_t> order(n);
  for (std::int64_t i = 0; i < n; ++i) order[i] = i;
  const auto* vals = v.ptr();
  std::sort(order.begin(), order.end(),
            [vals](std::int64_t a, std::int64_t b) { return vals[a] < vals[b]; });
  std::vector<Tensor<T>> sorted;
  sorted.reserve(n);
  for (auto i : order) sorted.push_back(ops::slice(v, 0, i, 1));
  return ops::scale(ops::reduce_sum_all(ops::concat(sorted, 0)), 1.0 / static_cast<double>(n));
}

}  // namespace detail

// Focal loss with two-level averaging: mean over each patient's lesions,
// then mean over patients.
template <typename T>
Tensor<T> lesion_focal_loss(const Tensor<T>& probs, const BatchLabels& labels,
                            const LossConfig& cfg) {
  cfg.validate();
  labels.validate(probs.dim(0), probs.dim(1));
  const auto n = probs.dim(0), c = probs.dim(1);
  // z_c * y_{i,c} baked into one constant mask
  std::vector<T> zy(n * c, T(0));
  for (std::int64_t i = 0; i < n; ++i) {
    zy[i * c + labels.lesion_class[i]] = static_cast<T>(cfg.class_weights[labels.lesion_class[i]]);
  }
  const Tensor<T> zy_mask({n, c}, std::move(zy));
  auto p = ops::clamp(probs, cfg.prob_clamp, 1.0 - cfg.prob_clamp);
  auto focal = ops::pow_const(ops::add_const(ops::scale(p, -1.0), 1.0), cfg.gamma);
  auto terms = ops::mul(ops::mul(zy_mask, focal), ops::log(p));
  auto per_lesion = ops::scale(ops::reduce_sum(terms, 1), -1.0);  // [N]
  std::vector<Tensor<T>> per_patient;
  per_patient.reserve(labels.patient_ranges.size());
  for (const auto& [b, e] : labels.patient_ranges) {
    per_patient.push_back(detail::ordered_mean(ops::slice(per_lesion, 0, b, e - b)));
  }
  auto stacked = per_patient.size() == 1 ? per_patient[0] : ops::concat(per_patient, 0);
  return detail::ordered_mean(stacked);
}

// Per-lesion malignant/benign mass, then per-patient max aggregation. The
// backward of each max routes gradient to the argmax lesion only (first
// index on ties).
template <typename T>
PatientAggregates<T> patient_aggregate(const Tensor<T>& probs, const BatchLabels& labels,
                                       const LossConfig& cfg) {
  cfg.validate();
  labels.validate(probs.dim(0), probs.dim(1));
  auto pm = ops::matmul(probs, detail::kind_column<T>(cfg, ClassKind::malignant));  // [N x 1]
  auto pb = ops::matmul(probs, detail::kind_column<T>(cfg, ClassKind::benign));     // [N x 1]
  Tensor<T> q_lesion;
  if (cfg.screening_q_tumor_sum) {
    q_lesion = ops::add(pm, pb);
  } else {
    // concat -> row max; ties prefer the malignant column
    q_lesion = ops::reduce_max(ops::concat<T>({pm, pb}, 1), 1);
  }
  q_lesion = ops::reshape(q_lesion, {probs.dim(0)});
  auto pm_flat = ops::reshape(pm, {probs.dim(0)});
  auto pb_flat = ops::reshape(pb, {probs.dim(0)});

  auto per_patient_max = [&](const Tensor<T>& rows) {
    std::vector<Tensor<T>> maxes;
    maxes.reserve(labels.patient_ranges.size());
    for (const auto& [b, e] : labels.patient_ranges) {
      maxes.push_back(ops::reduce_max_all(ops::slice(rows, 0, b, e - b)));
    }
    return maxes.size() == 1 ? maxes[0] : ops::concat(maxes, 0);
  };

  PatientAggregates<T> agg;
  agg.p_malig = per_patient_max(pm_flat);
  agg.p_benign = per_patient_max(pb_flat);
  agg.q = per_patient_max(q_lesion);
  return agg;
}

namespace detail {

// -(1/M) sum_j [ t_j log s_j + (1 - t_j) log(1 - s_j) ]
template <typename T>
Tensor<T> binary_ce(const Tensor<T>& scores, const std::vector<int>& targets, double clamp_eps) {
  const auto m = scores.dim(0);
  if (static_cast<std::size_t>(m) != targets.size()) {
    throw ContractError("binary_ce: score/target size mismatch");
  }
  std::vector<T> pos(m), neg(m);
  for (std::int64_t j = 0; j < m; ++j) {
    pos[j] = targets[j] ? T(1) : T(0);
    neg[j] = targets[j] ? T(0) : T(1);
  }
  const Tensor<T> tpos({m}, std::move(pos));
  const Tensor<T> tneg({m}, std::move(neg));
  auto s = ops::clamp(scores, clamp_eps, 1.0 - clamp_eps);
  auto one_minus = ops::clamp(ops::add_const(ops::scale(scores, -1.0), 1.0), clamp_eps,
                              1.0 - clamp_eps);
  auto ll = ops::add(ops::mul(tpos, ops::log(s)), ops::mul(tneg, ops::log(one_minus)));
  return ops::scale(ordered_mean(ll), -1.0);
}

}  // namespace detail

template <typename T>
Tensor<T> patient_diagnosis_loss(const PatientAggregates<T>& agg, const BatchLabels& labels,
                                 const LossConfig& cfg) {
  return detail::binary_ce(agg.p_malig, labels.patient_malignant, cfg.prob_clamp);
}

template <typename T>
Tensor<T> screening_loss(const PatientAggregates<T>& agg, const BatchLabels& labels,
                         const LossConfig& cfg) {
  return detail::binary_ce(agg.q, labels.patient_has_tumor, cfg.prob_clamp);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& lesion, const Tensor<T>& patient,
                     const Tensor<T>& screening, const LossConfig& cfg) {
  cfg.validate();
  auto weighted = ops::add(ops::scale(lesion, cfg.alpha), ops::scale(patient, cfg.beta));
  return ops::add(weighted, ops::scale(screening, 1.0 - cfg.alpha - cfg.beta));
}

}  // namespace plus::train
