#pragma once

// Evaluation protocol: dataset-level IoU, target-level detection rate (Pd)
// and false-alarm rate (Fa), the composite Score, and ROC threshold sweeps.
//
// IoU sums pixel counts over the whole dataset: sum(TP) / sum(T + P - TP).
// Pd counts detected ground-truth components over all components. A ground
// truth component counts as detected iff a predicted component overlaps it
// or has its centroid within max_centroid_distance of the ground-truth
// centroid; predicted components are consumed greedily by ascending
// centroid distance, one ground-truth match each. The centroid rule is what
// lets single-pixel centroid injections score as detections even when they
// land a pixel off target.
// Fa counts wrongly predicted foreground pixels over all pixels. The same
// off-target injected pixel that detects a target via the centroid rule
// still counts as a false pixel; the two bookkeepings are independent.
// Score = alpha * IoU + (1 - alpha) * Pd, only valid while Fa stays below
// fa_limit; otherwise no score is produced.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fest/ccl.hpp"
#include "fest/raster.hpp"
#include "fest/sensitivity.hpp"

namespace fest {

struct MatchConfig {
  double max_centroid_distance = 3.0;  // pixels, >= 0
  Connectivity connectivity = Connectivity::eight;

  void validate() const {
    if (!(max_centroid_distance >= 0.0)) {
      throw std::invalid_argument("MatchConfig: distance limit must be >= 0");
    }
  }
};

struct ScoreConfig {
  double alpha = 0.5;      // in [0, 1]
  double fa_limit = 1e-4;  // validity cutoff

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw std::invalid_argument("ScoreConfig: alpha must be in [0, 1]");
    }
    if (!(fa_limit > 0.0)) {
      throw std::invalid_argument("ScoreConfig: fa_limit must be positive");
    }
  }
};

struct MatchResult {
  std::vector<bool> gt_detected;   // per ground-truth component id, 0-based
  std::int64_t false_pixels = 0;   // predicted foreground on gt background
};

inline MatchResult match_targets(const BinaryMask& pred, const BinaryMask& gt,
                                 const MatchConfig& cfg = {}) {
  cfg.validate();
  if (!pred.grid().same_shape(gt.grid())) {
    throw std::invalid_argument("match_targets: dimension mismatch");
  }
  const LabelMap pred_lm = label_components(pred, cfg.connectivity);
  const LabelMap gt_lm = label_components(gt, cfg.connectivity);
  const int np = pred_lm.component_count();
  const int ng = gt_lm.component_count();

  MatchResult result;
  result.gt_detected.assign(ng, false);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && !gt[i]) result.false_pixels += 1;
  }
  if (np == 0 || ng == 0) return result;

  // Overlap table from one joint pixel pass.
  std::vector<std::uint8_t> overlap(static_cast<std::size_t>(np) * ng, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred_lm[i] && gt_lm[i]) {
      overlap[static_cast<std::size_t>(pred_lm[i] - 1) * ng + (gt_lm[i] - 1)] = 1;
    }
  }

  struct Candidate {
    double dist;
    int pred_id;  // 0-based
    int gt_id;    // 0-based
  };
  std::vector<Candidate> candidates;
  for (int p = 0; p < np; ++p) {
    const ComponentStat& ps = pred_lm.components()[p];
    for (int g = 0; g < ng; ++g) {
      const ComponentStat& gs = gt_lm.components()[g];
      const double dist = std::hypot(ps.centroid_row - gs.centroid_row,
                                     ps.centroid_col - gs.centroid_col);
      if (overlap[static_cast<std::size_t>(p) * ng + g] ||
          dist <= cfg.max_centroid_distance) {
        candidates.push_back(Candidate{dist, p, g});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.dist != b.dist) return a.dist < b.dist;
              if (a.pred_id != b.pred_id) return a.pred_id < b.pred_id;
              return a.gt_id < b.gt_id;
            });
  std::vector<bool> pred_used(np, false);
  for (const Candidate& c : candidates) {
    if (pred_used[c.pred_id] || result.gt_detected[c.gt_id]) continue;
    pred_used[c.pred_id] = true;
    result.gt_detected[c.gt_id] = true;
  }
  return result;
}

/// Raw per-image counts; dataset ratios are reductions over these.
struct ImageTally {
  std::int64_t tp = 0;         // pixels foreground in both
  std::int64_t gt_area = 0;    // ground-truth foreground pixels
  std::int64_t pred_area = 0;  // predicted foreground pixels
  int detected = 0;            // detected ground-truth components
  int targets = 0;             // ground-truth components
  std::int64_t false_pixels = 0;
  std::int64_t pixels = 0;     // height * width
};

inline ImageTally tally_image(const BinaryMask& pred, const BinaryMask& gt,
                              const MatchConfig& cfg = {}) {
  if (!pred.grid().same_shape(gt.grid())) {
    throw std::invalid_argument("tally_image: dimension mismatch");
  }
  ImageTally t;
  t.pixels = static_cast<std::int64_t>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    t.tp += pred[i] & gt[i];
    t.gt_area += gt[i];
    t.pred_area += pred[i];
  }
  const MatchResult m = match_targets(pred, gt, cfg);
  t.false_pixels = m.false_pixels;
  t.targets = static_cast<int>(m.gt_detected.size());
  for (bool d : m.gt_detected) t.detected += d ? 1 : 0;
  return t;
}

inline double dataset_iou(const std::vector<ImageTally>& tallies) {
  std::int64_t tp = 0, uni = 0;
  for (const ImageTally& t : tallies) {
    tp += t.tp;
    uni += t.gt_area + t.pred_area - t.tp;
  }
  if (uni == 0) return 1.0;  // nothing annotated, nothing predicted
  return static_cast<double>(tp) / static_cast<double>(uni);
}

inline double dataset_pd(const std::vector<ImageTally>& tallies) {
  std::int64_t detected = 0, targets = 0;
  for (const ImageTally& t : tallies) {
    detected += t.detected;
    targets += t.targets;
  }
  if (targets == 0) {
    throw std::runtime_error("dataset_pd: no ground-truth targets in dataset");
  }
  return static_cast<double>(detected) / static_cast<double>(targets);
}

inline double dataset_fa(const std::vector<ImageTally>& tallies) {
  if (tallies.empty()) {
    throw std::invalid_argument("dataset_fa: empty dataset");
  }
  std::int64_t false_pixels = 0, pixels = 0;
  for (const ImageTally& t : tallies) {
    false_pixels += t.false_pixels;
    pixels += t.pixels;
  }
  return static_cast<double>(false_pixels) / static_cast<double>(pixels);
}

namespace detail {

inline std::vector<ImageTally> tally_dataset(const std::vector<BinaryMask>& preds,
                                             const std::vector<BinaryMask>& gts,
                                             const MatchConfig& cfg) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("prediction and ground-truth lists differ in length");
  }
  std::vector<ImageTally> tallies;
  tallies.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    tallies.push_back(tally_image(preds[i], gts[i], cfg));
  }
  return tallies;
}

}  // namespace detail

inline double dataset_iou(const std::vector<BinaryMask>& preds,
                          const std::vector<BinaryMask>& gts) {
  return dataset_iou(detail::tally_dataset(preds, gts, MatchConfig{}));
}

struct ScoreResult {
  std::optional<double> value;  // absent iff invalid
  bool valid = false;
};

inline ScoreResult score(double iou, double pd, double fa,
                         const ScoreConfig& cfg = {}) {
  cfg.validate();
  if (!(iou >= 0.0 && iou <= 1.0) || !(pd >= 0.0 && pd <= 1.0) || !(fa >= 0.0)) {
    throw std::invalid_argument("score: inputs out of range");
  }
  ScoreResult r;
  r.valid = fa < cfg.fa_limit;
  if (r.valid) r.value = cfg.alpha * iou + (1.0 - cfg.alpha) * pd;
  return r;
}

struct EvalReport {
  double iou = 0.0;
  double pd = 0.0;
  double fa = 0.0;
  ScoreResult score;
  std::vector<ImageTally> per_image;
};

inline EvalReport evaluate_dataset(const std::vector<BinaryMask>& preds,
                                   const std::vector<BinaryMask>& gts,
                                   const MatchConfig& match_cfg = {},
                                   const ScoreConfig& score_cfg = {}) {
  EvalReport report;
  report.per_image = detail::tally_dataset(preds, gts, match_cfg);
  report.iou = dataset_iou(report.per_image);
  report.pd = dataset_pd(report.per_image);
  report.fa = dataset_fa(report.per_image);
  report.score = score(report.iou, report.pd, report.fa, score_cfg);
  return report;
}

struct RocPoint {
  double threshold = 0.0;
  double fa = 0.0;
  double pd = 0.0;
};

/// Binarize every probability map at each threshold and evaluate Pd and Fa.
/// Thresholds must be strictly descending, each in (0, 1).
inline std::vector<RocPoint> roc_sweep(const std::vector<ProbMask>& probs,
                                       const std::vector<BinaryMask>& gts,
                                       const std::vector<double>& thresholds,
                                       const MatchConfig& cfg = {}) {
  if (probs.size() != gts.size()) {
    throw std::invalid_argument("roc_sweep: list length mismatch");
  }
  if (thresholds.empty()) {
    throw std::invalid_argument("roc_sweep: empty threshold list");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
      throw std::invalid_argument("roc_sweep: thresholds must be in (0, 1)");
    }
    if (i > 0 && !(thresholds[i] < thresholds[i - 1])) {
      throw std::invalid_argument("roc_sweep: thresholds must be strictly descending");
    }
  }
  std::vector<RocPoint> points;
  points.reserve(thresholds.size());
  for (double th : thresholds) {
    std::vector<ImageTally> tallies;
    tallies.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      tallies.push_back(tally_image(binarize(probs[i], th), gts[i], cfg));
    }
    points.push_back(RocPoint{th, dataset_fa(tallies), dataset_pd(tallies)});
  }
  return points;
}

}  // namespace fest
