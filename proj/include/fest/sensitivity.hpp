#pragma once

// Adjustable-sensitivity post-processing with two thresholds th1 > th2.
//
// Regions above th1 are strong targets and are kept with their full
// segmentation. The lower threshold th2 exposes weak targets: each
// 8-connected component of the th2 mask that does not touch the th1 mask
// is reduced to its centroid, which is injected into the output. Components
// that do overlap the th1 mask are dropped, since the th1 segmentation of
// the same region is finer. The output is therefore always a pixel-wise
// superset of the th1 mask and agrees with it on the th1 foreground.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fest/ccl.hpp"
#include "fest/raster.hpp"

namespace fest {

enum class InjectionStyle { single_pixel, cross3 };

struct ASConfig {
  double th1 = 0.5;
  double th2 = 0.1;
  InjectionStyle injection = InjectionStyle::single_pixel;

  void validate() const {
    if (!(th1 > 0.0 && th1 < 1.0) || !(th2 > 0.0 && th2 < 1.0)) {
      throw std::invalid_argument("ASConfig: thresholds must be in (0, 1)");
    }
    if (!(th1 > th2)) {
      throw std::invalid_argument("ASConfig: th1 must be greater than th2");
    }
  }
};

enum class TargetClass { strong, weak };

struct TargetReport {
  TargetClass cls = TargetClass::strong;
  std::int64_t pixel_count = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  double peak_confidence = 0.0;
};

/// Pixel is foreground iff its confidence is >= th.
inline BinaryMask binarize(const ProbMask& m, double th) {
  if (!(th > 0.0 && th < 1.0) || !std::isfinite(th)) {
    throw std::invalid_argument("binarize: threshold must be in (0, 1)");
  }
  std::vector<std::uint8_t> values(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    values[i] = m[i] >= th ? 1 : 0;
  }
  return BinaryMask(m.height(), m.width(), std::move(values));
}

struct ASResult {
  BinaryMask mask;
  std::vector<TargetReport> targets;
};

namespace detail {

/// Round to nearest pixel, ties toward the larger index, clamped inside.
inline int round_coord(double x, int limit) {
  int i = static_cast<int>(std::floor(x + 0.5));
  if (i < 0) i = 0;
  if (i > limit - 1) i = limit - 1;
  return i;
}

inline double component_peak(const ProbMask& prob, const LabelMap& lm, int id) {
  double peak = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (lm[i] == id && prob[i] > peak) peak = prob[i];
  }
  return peak;
}

}  // namespace detail

inline ASResult apply_as(const ProbMask& prob, const ASConfig& cfg) {
  cfg.validate();
  const int h = prob.height();
  const int w = prob.width();

  const BinaryMask strong_mask = binarize(prob, cfg.th1);
  const BinaryMask low_mask = binarize(prob, cfg.th2);
  const LabelMap strong_lm = label_components(strong_mask, Connectivity::eight);
  const LabelMap low_lm = label_components(low_mask, Connectivity::eight);

  // A th2 component is weak iff none of its pixels is strong foreground.
  std::vector<bool> touches_strong(static_cast<std::size_t>(low_lm.component_count()) + 1, false);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (low_lm[i] && strong_mask[i]) touches_strong[low_lm[i]] = true;
  }

  ASResult result;
  std::vector<std::uint8_t> out(strong_mask.data());

  for (const ComponentStat& s : strong_lm.components()) {
    result.targets.push_back(TargetReport{
        TargetClass::strong, s.pixel_count, s.centroid_row, s.centroid_col,
        detail::component_peak(prob, strong_lm, s.id)});
  }

  for (const ComponentStat& s : low_lm.components()) {
    if (touches_strong[s.id]) continue;
    result.targets.push_back(TargetReport{
        TargetClass::weak, s.pixel_count, s.centroid_row, s.centroid_col,
        detail::component_peak(prob, low_lm, s.id)});
    const int r = detail::round_coord(s.centroid_row, h);
    const int c = detail::round_coord(s.centroid_col, w);
    out[static_cast<std::size_t>(r) * w + c] = 1;
    if (cfg.injection == InjectionStyle::cross3) {
      if (r > 0) out[static_cast<std::size_t>(r - 1) * w + c] = 1;
      if (r + 1 < h) out[static_cast<std::size_t>(r + 1) * w + c] = 1;
      if (c > 0) out[static_cast<std::size_t>(r) * w + c - 1] = 1;
      if (c + 1 < w) out[static_cast<std::size_t>(r) * w + c + 1] = 1;
    }
  }

  result.mask = BinaryMask(h, w, std::move(out));
  return result;
}

/// Strong and weak target geometry without building the output mask.
inline std::vector<TargetReport> classify_targets(const ProbMask& prob,
                                                  const ASConfig& cfg) {
  return apply_as(prob, cfg).targets;
}

}  // namespace fest
