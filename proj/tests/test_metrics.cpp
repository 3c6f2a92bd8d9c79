// Evaluation harness against brute-force recount oracles on randomized
// instances, plus the hand cases for matching, PRF, AUC, and confusion.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plus/core/rng.hpp"
#include "plus/eval/metrics.hpp"

using namespace plus;
using namespace plus::eval;
using plus::data::ByteVol;

namespace {

ByteVol box(std::array<std::int64_t, 3> dims, std::int64_t x0, std::int64_t x1) {
  auto m = ByteVol::zeros(dims);
  for (std::int64_t x = x0; x < x1; ++x) m.v[m.index(x, 0, 0)] = 1;
  return m;
}

}  // namespace

TEST_CASE("mask IoU and matching hand cases") {
  const std::array<std::int64_t, 3> dims{8, 1, 1};
  auto a = box(dims, 0, 3);
  CHECK(mask_iou(a, a) == 1.0);
  auto b = box(dims, 4, 6);
  CHECK(mask_iou(a, b) == 0.0);
  auto c = box(dims, 2, 3);  // overlaps a on 1 of 3 voxels
  CHECK(mask_iou(a, c) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // identical pair matches with IoU 1
  auto m1 = match_lesions({&a}, {&a}, 0.3);
  REQUIRE(m1.pairs.size() == 1);
  CHECK(m1.iou[0] == 1.0);
  CHECK(m1.unmatched_candidates.empty());
  CHECK(m1.unmatched_gt.empty());

  // disjoint pair: 1 FP and 1 FN
  auto m2 = match_lesions({&a}, {&b}, 0.3);
  CHECK(m2.pairs.empty());
  CHECK(m2.unmatched_candidates.size() == 1);
  CHECK(m2.unmatched_gt.size() == 1);

  // IoU 1/3 at threshold 0.3 still matches
  auto m3 = match_lesions({&c}, {&a}, 0.3);
  CHECK(m3.pairs.size() == 1);

  CHECK_THROWS_AS(match_lesions({&a}, {&a}, 0.0), ContractError);
}

TEST_CASE("greedy matching invariants on random instances") {
  Rng rng(5);
  const std::array<std::int64_t, 3> dims{24, 1, 1};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<ByteVol> cands, gts;
    const int nc = 1 + static_cast<int>(rng.below(5));
    const int ng = 1 + static_cast<int>(rng.below(5));
    for (int i = 0; i < nc; ++i) {
      const auto s = rng.below(18);
      cands.push_back(box(dims, s, s + 2 + rng.below(5)));
    }
    for (int i = 0; i < ng; ++i) {
      const auto s = rng.below(18);
      gts.push_back(box(dims, s, s + 2 + rng.below(5)));
    }
    std::vector<const ByteVol*> cp, gp;
    for (auto& c : cands) cp.push_back(&c);
    for (auto& g : gts) gp.push_back(&g);
    auto m = match_lesions(cp, gp, 0.3);
    // count conservation
    CHECK(m.pairs.size() + m.unmatched_candidates.size() == cands.size());
    CHECK(m.pairs.size() + m.unmatched_gt.size() == gts.size());
    // each side matched at most once and IoU above threshold
    std::vector<int> cu(nc, 0), gu(ng, 0);
    for (std::size_t p = 0; p < m.pairs.size(); ++p) {
      cu[m.pairs[p].first] += 1;
      gu[m.pairs[p].second] += 1;
      CHECK(m.iou[p] >= 0.3);
    }
    for (int v : cu) CHECK(v <= 1);
    for (int v : gu) CHECK(v <= 1);
  }
}

TEST_CASE("detection PRF hand cases") {
  const std::array<std::int64_t, 3> dims{16, 1, 1};
  auto g0 = box(dims, 0, 4), g1 = box(dims, 6, 10), c0 = box(dims, 0, 4), c1 = box(dims, 11, 14);
  // c0 matches g0 (right class), c1 unmatched (FP), g1 unmatched (FN)
  auto m = match_lesions({&c0, &c1}, {&g0, &g1}, 0.3);
  auto prf = detection_prf(m, {1, 2}, {1, 0}, 4);
  CHECK(prf.tp == 1);
  CHECK(prf.fp == 1);
  CHECK(prf.fn == 1);
  CHECK(prf.precision == doctest::Approx(0.5));
  CHECK(prf.recall == doctest::Approx(0.5));
  CHECK(prf.f1 == doctest::Approx(0.5));

  // perfect predictions
  auto mp = match_lesions({&c0}, {&g0}, 0.3);
  auto perfect = detection_prf(mp, {3}, {3}, 4);
  CHECK(perfect.f1 == 1.0);

  // all candidates predicted non-lesion: no detections at all
  auto none = detection_prf(mp, {4}, {3}, 4);
  CHECK(none.tp == 0);
  CHECK(none.fp == 0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("detection PRF matches a brute-force recount on random instances") {
  Rng rng(9);
  const std::array<std::int64_t, 3> dims{32, 1, 1};
  for (int rep = 0; rep < 200; ++rep) {
    const int nc = static_cast<int>(rng.below(8));
    const int ng = 1 + static_cast<int>(rng.below(7));
    std::vector<ByteVol> cands, gts;
    std::vector<int> cand_cls, gt_cls;
    for (int i = 0; i < nc; ++i) {
      const auto s = rng.below(24);
      cands.push_back(box(dims, s, s + 2 + rng.below(6)));
      cand_cls.push_back(static_cast<int>(rng.below(5)));  // 4 = non-lesion
    }
    for (int i = 0; i < ng; ++i) {
      const auto s = rng.below(24);
      gts.push_back(box(dims, s, s + 2 + rng.below(6)));
      gt_cls.push_back(static_cast<int>(rng.below(4)));
    }
    std::vector<const ByteVol*> cp, gp;
    for (auto& c : cands) cp.push_back(&c);
    for (auto& g : gts) gp.push_back(&g);
    auto m = match_lesions(cp, gp, 0.3);
    auto prf = detection_prf(m, cand_cls, gt_cls, 4);

    // oracle: direct recount from the match list
    std::int64_t tp = 0, detections = 0;
    for (int i = 0; i < nc; ++i) detections += cand_cls[i] != 4;
    for (auto [ci, gi] : m.pairs) {
      if (cand_cls[ci] != 4 && cand_cls[ci] == gt_cls[gi]) ++tp;
    }
    CHECK(prf.tp == tp);
    CHECK(prf.fp == detections - tp);
    CHECK(prf.fn == ng - tp);
  }
}

TEST_CASE("roc_auc hand cases and pair-count oracle") {
  CHECK(roc_auc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(roc_auc({0.5, 0.5, 0.5}, {1, 0, 1}) == 0.5);
  CHECK(roc_auc({0.8, 0.6, 0.4}, {1, 0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), ContractError);

  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(19));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 8) / 8.0;  // force ties
      labels[i] = rng.uniform() < 0.5;
      (labels[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    // brute force over all (positive, negative) pairs
    double wins = 0;
    std::int64_t pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (labels[i] == 1 && labels[j] == 0) {
          ++pairs;
          if (scores[i] > scores[j]) wins += 1;
          else if (scores[i] == scores[j]) wins += 0.5;
        }
      }
    }
    CHECK(roc_auc(scores, labels) == doctest::Approx(wins / pairs).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc complement identity") {
  Rng rng(17);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    scores.push_back(std::round(rng.uniform() * 10) / 10.0);
    labels.push_back(i % 3 == 0);
  }
  std::vector<int> flipped;
  for (int l : labels) flipped.push_back(1 - l);
  CHECK(roc_auc(scores, labels) + roc_auc(scores, flipped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("confusion matrix oracles") {
  auto perfect = confusion_matrix({0, 1, 2}, {0, 1, 2}, 3);
  for (int g = 0; g < 3; ++g) {
    for (int p = 0; p < 3; ++p) CHECK(perfect[g][p] == (g == p ? 1 : 0));
  }
  auto empty = confusion_matrix({}, {}, 2);
  CHECK(empty[0][0] + empty[0][1] + empty[1][0] + empty[1][1] == 0);

  // gt [0,0,1], pred [0,1,1] -> [[1,1],[0,1]]
  auto m = confusion_matrix({0, 1, 1}, {0, 0, 1}, 2);
  CHECK(m[0][0] == 1);
  CHECK(m[0][1] == 1);
  CHECK(m[1][0] == 0);
  CHECK(m[1][1] == 1);
  CHECK_THROWS_AS(confusion_matrix({0, 5}, {0, 0}, 2), ContractError);

  // row sums equal per-class GT counts on random instances
  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = static_cast<int>(rng.below(20));
    std::vector<int> pred(n), gt(n);
    std::vector<std::int64_t> gt_count(4, 0);
    for (int i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(4));
      gt[i] = static_cast<int>(rng.below(4));
      gt_count[gt[i]] += 1;
    }
    auto cm = confusion_matrix(pred, gt, 4);
    for (int g = 0; g < 4; ++g) {
      std::int64_t row = 0;
      for (int p = 0; p < 4; ++p) row += cm[g][p];
      CHECK(row == gt_count[g]);
    }
  }
}

TEST_CASE("binary counts and screening hand case") {
  // 4 patients: TP=2, FP=1, FN=0, TN=1 -> F1 = 0.8, accuracy = 0.75
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.2};
  const std::vector<int> labels{1, 1, 0, 0};
  auto c = binary_counts(scores, labels, 0.5);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 0);
  CHECK(c.tn == 1);
  auto prf = prf_from_counts(c.tp, c.fp, c.fn);
  CHECK(prf.f1 == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(c.accuracy() == doctest::Approx(0.75).epsilon(1e-12));

  // threshold edge: malignant patient scored 0.4 at threshold 0.5 is missed
  auto miss = binary_counts({0.4}, {1}, 0.5);
  CHECK(miss.fn == 1);
  CHECK(prf_from_counts(miss.tp, miss.fp, miss.fn).recall == 0.0);
}

TEST_CASE("macro f1 and order invariance") {
  const std::vector<int> gt{0, 0, 1, 1, 2, 2};
  const std::vector<int> pred{0, 1, 1, 1, 2, 0};
  const double f = macro_f1(pred, gt, {0, 1, 2});
  // reversed order gives the identical value
  std::vector<int> gt_r(gt.rbegin(), gt.rend());
  std::vector<int> pred_r(pred.rbegin(), pred.rend());
  CHECK(macro_f1(pred_r, gt_r, {0, 1, 2}) == f);
  CHECK(macro_f1(gt, gt, {0, 1, 2}) == 1.0);
}
