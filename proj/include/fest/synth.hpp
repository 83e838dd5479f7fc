#pragma once

// Synthetic scene generation for desk-scale verification.
//
// Confidence over a target is modeled as a Gaussian bump: highest in the
// center, decaying toward the edge. A scene places target bumps (with an
// independent ground-truth disk radius, so segmentation is imperfect on
// purpose), non-target clutter bumps that create false-alarm pressure, and
// zero-mean pixel noise. Everything is driven by SplitMix64 streams, so a
// scene is a pure function of its spec and a dataset is a pure function of
// (template, n, master seed):
//   case seed  i  = mix_seed(master_seed XOR i)
//   scene sampling consumes SplitMix64(case seed); the scene's noise seed
//   is the next draw from that sampling stream
//   noise stream   = SplitMix64(scene seed), prob noise first (raster
//   order), then image noise

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fest/raster.hpp"
#include "fest/rng.hpp"

namespace fest {

struct TargetSpec {
  double row = 0.0;
  double col = 0.0;
  double radius = 2.0;        // confidence falloff, pixels
  double peak = 0.9;          // confidence at center, in (0, 1]
  double truth_radius = 2.0;  // ground-truth disk, pixels
};

struct ClutterSpec {
  double row = 0.0;
  double col = 0.0;
  double radius = 1.0;
  double peak = 0.2;  // in (0, 1)
};

struct SceneSpec {
  int height = 128;
  int width = 128;
  std::vector<TargetSpec> targets;
  std::vector<ClutterSpec> clutter;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (height <= 0 || width <= 0) {
      throw std::invalid_argument("SceneSpec: dimensions must be positive");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw std::invalid_argument("SceneSpec: noise_sigma must be >= 0");
    }
    auto check_center = [&](double r, double c) {
      if (!(r >= 0.0 && r <= height - 1.0 && c >= 0.0 && c <= width - 1.0)) {
        throw std::invalid_argument("SceneSpec: center outside image");
      }
    };
    for (const TargetSpec& t : targets) {
      check_center(t.row, t.col);
      if (!(t.radius >= 1.0) || !(t.truth_radius >= 1.0)) {
        throw std::invalid_argument("SceneSpec: radii must be >= 1");
      }
      if (!(t.peak > 0.0 && t.peak <= 1.0)) {
        throw std::invalid_argument("SceneSpec: target peak must be in (0, 1]");
      }
    }
    for (const ClutterSpec& c : clutter) {
      check_center(c.row, c.col);
      if (!(c.radius >= 1.0)) {
        throw std::invalid_argument("SceneSpec: radii must be >= 1");
      }
      if (!(c.peak > 0.0 && c.peak < 1.0)) {
        throw std::invalid_argument("SceneSpec: clutter peak must be in (0, 1)");
      }
    }
  }
};

struct SynthCase {
  BinaryMask gt;
  ProbMask prob;
  GrayImage image;
  SceneSpec spec;
};

namespace detail {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double gaussian_bump(double dr, double dc, double radius, double peak) {
  const double d2 = dr * dr + dc * dc;
  return peak * std::exp(-d2 / (2.0 * radius * radius));
}

}  // namespace detail

inline SynthCase gen_scene(const SceneSpec& spec) {
  spec.validate();
  const int h = spec.height;
  const int w = spec.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  // Noiseless confidence signal shared by the probability map and image.
  std::vector<double> signal(n, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double v = 0.0;
      for (const TargetSpec& t : spec.targets) {
        v += detail::gaussian_bump(r - t.row, c - t.col, t.radius, t.peak);
      }
      for (const ClutterSpec& cl : spec.clutter) {
        v += detail::gaussian_bump(r - cl.row, c - cl.col, cl.radius, cl.peak);
      }
      signal[static_cast<std::size_t>(r) * w + c] = v;
    }
  }

  std::vector<std::uint8_t> gt(n, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (const TargetSpec& t : spec.targets) {
        const double dr = r - t.row;
        const double dc = c - t.col;
        if (dr * dr + dc * dc <= t.truth_radius * t.truth_radius) {
          gt[static_cast<std::size_t>(r) * w + c] = 1;
          break;
        }
      }
    }
  }

  SplitMix64 rng(spec.seed);
  std::vector<double> prob(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = detail::clamp01(signal[i] + rng.next_gaussian(0.0, spec.noise_sigma));
  }
  std::vector<double> image(n);
  for (std::size_t i = 0; i < n; ++i) {
    image[i] = detail::clamp01(0.1 + 0.8 * signal[i] +
                               rng.next_gaussian(0.0, spec.noise_sigma));
  }

  SynthCase out{BinaryMask(h, w, std::move(gt)), ProbMask(h, w, std::move(prob)),
                GrayImage(h, w, std::move(image)), spec};
  return out;
}

/// Peak confidence band with a sampling weight; a template usually carries
/// separate strong / mid / weak bands.
struct PeakBand {
  double lo = 0.55;
  double hi = 0.95;
  double weight = 1.0;
};

struct DatasetTemplate {
  int height = 128;
  int width = 128;
  int min_targets = 2;
  int max_targets = 4;
  double radius_lo = 1.5;
  double radius_hi = 3.0;
  double truth_radius_lo = 1.5;
  double truth_radius_hi = 3.0;
  std::vector<PeakBand> peak_bands = {
      {0.55, 0.95, 0.55}, {0.32, 0.48, 0.25}, {0.14, 0.28, 0.20}};
  int min_clutter = 0;
  int max_clutter = 1;
  double clutter_radius_lo = 1.0;
  double clutter_radius_hi = 1.5;
  double clutter_peak_lo = 0.15;
  double clutter_peak_hi = 0.45;
  double noise_sigma = 0.002;
  double min_separation = 24.0;  // between any two blob centers
  int border_margin = 12;

  void validate() const {
    if (height <= 0 || width <= 0) {
      throw std::invalid_argument("DatasetTemplate: dimensions must be positive");
    }
    if (min_targets < 1 || max_targets < min_targets) {
      throw std::invalid_argument("DatasetTemplate: bad target count range");
    }
    if (min_clutter < 0 || max_clutter < min_clutter) {
      throw std::invalid_argument("DatasetTemplate: bad clutter count range");
    }
    if (!(radius_lo >= 1.0 && radius_hi >= radius_lo) ||
        !(truth_radius_lo >= 1.0 && truth_radius_hi >= truth_radius_lo) ||
        !(clutter_radius_lo >= 1.0 && clutter_radius_hi >= clutter_radius_lo)) {
      throw std::invalid_argument("DatasetTemplate: bad radius range");
    }
    if (peak_bands.empty()) {
      throw std::invalid_argument("DatasetTemplate: at least one peak band");
    }
    for (const PeakBand& b : peak_bands) {
      if (!(b.lo > 0.0 && b.lo <= b.hi && b.hi <= 1.0) || !(b.weight > 0.0)) {
        throw std::invalid_argument("DatasetTemplate: bad peak band");
      }
    }
    if (!(clutter_peak_lo > 0.0 && clutter_peak_hi >= clutter_peak_lo &&
          clutter_peak_hi < 1.0)) {
      throw std::invalid_argument("DatasetTemplate: bad clutter peak range");
    }
    if (!(noise_sigma >= 0.0)) {
      throw std::invalid_argument("DatasetTemplate: noise_sigma must be >= 0");
    }
    if (border_margin < 0 || 2 * border_margin >= height ||
        2 * border_margin >= width) {
      throw std::invalid_argument("DatasetTemplate: margin leaves no interior");
    }
  }
};

inline std::uint64_t case_seed(std::uint64_t master_seed, int index) {
  return mix_seed(master_seed ^ static_cast<std::uint64_t>(index));
}

/// Deterministic scene sampling from a template. Positions are integer
/// pixels, rejection-sampled until every pair of blob centers is at least
/// min_separation apart.
inline SceneSpec sample_scene_spec(const DatasetTemplate& tpl,
                                   std::uint64_t seed) {
  tpl.validate();
  SplitMix64 rng(seed);
  SceneSpec spec;
  spec.height = tpl.height;
  spec.width = tpl.width;
  spec.noise_sigma = tpl.noise_sigma;

  std::vector<std::pair<double, double>> centers;
  auto place = [&]() -> std::pair<double, double> {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double r = rng.next_int(tpl.border_margin, tpl.height - 1 - tpl.border_margin);
      const double c = rng.next_int(tpl.border_margin, tpl.width - 1 - tpl.border_margin);
      bool ok = true;
      for (const auto& [pr, pc] : centers) {
        if (std::hypot(r - pr, c - pc) < tpl.min_separation) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.emplace_back(r, c);
        return {r, c};
      }
    }
    throw std::runtime_error(
        "sample_scene_spec: cannot place blobs with the requested separation");
  };

  double total_weight = 0.0;
  for (const PeakBand& b : tpl.peak_bands) total_weight += b.weight;
  auto draw_peak = [&]() {
    double u = rng.next_unit() * total_weight;
    for (const PeakBand& b : tpl.peak_bands) {
      if (u < b.weight || &b == &tpl.peak_bands.back()) {
        return rng.next_uniform(b.lo, b.hi);
      }
      u -= b.weight;
    }
    return rng.next_uniform(tpl.peak_bands.back().lo, tpl.peak_bands.back().hi);
  };

  const int n_targets = rng.next_int(tpl.min_targets, tpl.max_targets);
  for (int i = 0; i < n_targets; ++i) {
    TargetSpec t;
    std::tie(t.row, t.col) = place();
    t.radius = rng.next_uniform(tpl.radius_lo, tpl.radius_hi);
    t.truth_radius = rng.next_uniform(tpl.truth_radius_lo, tpl.truth_radius_hi);
    t.peak = draw_peak();
    spec.targets.push_back(t);
  }
  const int n_clutter = rng.next_int(tpl.min_clutter, tpl.max_clutter);
  for (int i = 0; i < n_clutter; ++i) {
    ClutterSpec c;
    std::tie(c.row, c.col) = place();
    c.radius = rng.next_uniform(tpl.clutter_radius_lo, tpl.clutter_radius_hi);
    c.peak = rng.next_uniform(tpl.clutter_peak_lo, tpl.clutter_peak_hi);
    spec.clutter.push_back(c);
  }
  spec.seed = rng.next_u64();  // noise stream seed
  return spec;
}

inline std::vector<SynthCase> gen_dataset(const DatasetTemplate& tpl, int n,
                                          std::uint64_t master_seed) {
  if (n < 1) {
    throw std::invalid_argument("gen_dataset: n must be >= 1");
  }
  std::vector<SynthCase> cases;
  cases.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cases.push_back(gen_scene(sample_scene_spec(tpl, case_seed(master_seed, i))));
  }
  return cases;
}

}  // namespace fest
