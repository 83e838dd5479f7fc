#pragma once

// Edge-enhanced, difficulty-mined binary cross-entropy loss.
//
// Pipeline per (label, prediction) pair:
//   1. extract the inner boundary of the label foreground (a foreground
//      pixel is an edge pixel iff at least one 4-neighbor is background;
//      out-of-image neighbors count as background),
//   2. build the weight grid: 1 off-edge, edge_weight on-edge,
//   3. per-pixel clamped BCE, multiplied by the weight grid,
//   4. keep the k = max(1, floor(mining_ratio * N)) largest weighted
//      losses; ties at the k-th value are resolved toward lower raster
//      index so exactly k pixels are kept,
//   5. the loss is the mean over the kept set.
//
// Setting mining_ratio = 1 keeps every pixel (edge-weighting only);
// edge_weight = 1 disables the edge term (mining only); both together
// reduce to plain mean BCE, exactly.
//
// The analytic gradient treats the kept set as fixed: for a kept pixel,
// d(loss)/d(prediction) = weight * (p - y) / (p * (1 - p)) / k, zero at
// unkept pixels and wherever the probability clamp is active.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fest/raster.hpp"

namespace fest {

using EdgeMap = BinaryMask;
using LossMatrix = Grid<double>;
using GradMatrix = Grid<double>;

struct LossConfig {
  double edge_weight = 4.0;   // >= 1
  double mining_ratio = 0.5;  // in (0, 1]
  double clamp_eps = 1e-7;    // in (0, 0.5)

  void validate() const {
    if (!(edge_weight >= 1.0) || !std::isfinite(edge_weight)) {
      throw std::invalid_argument("LossConfig: edge_weight must be >= 1");
    }
    if (!(mining_ratio > 0.0 && mining_ratio <= 1.0)) {
      throw std::invalid_argument("LossConfig: mining_ratio must be in (0, 1]");
    }
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
      throw std::invalid_argument("LossConfig: clamp_eps must be in (0, 0.5)");
    }
  }
};

struct EedmResult {
  double loss = 0.0;
  std::vector<std::size_t> kept;  // raster indices of mined pixels, ascending
};

/// Inner boundary of the label foreground.
inline EdgeMap extract_edge_map(const BinaryMask& label) {
  const int h = label.height();
  const int w = label.width();
  std::vector<std::uint8_t> edge(label.size(), 0);
  auto background = [&](int r, int c) {
    return r < 0 || r >= h || c < 0 || c >= w || !label.at(r, c);
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!label.at(r, c)) continue;
      if (background(r - 1, c) || background(r + 1, c) ||
          background(r, c - 1) || background(r, c + 1)) {
        edge[static_cast<std::size_t>(r) * w + c] = 1;
      }
    }
  }
  return EdgeMap(h, w, std::move(edge));
}

/// Weight grid: 1 where the edge map is 0, edge_weight where it is positive.
inline LossMatrix edge_weight_matrix(const EdgeMap& e, double edge_weight) {
  if (!(edge_weight >= 1.0) || !std::isfinite(edge_weight)) {
    throw std::invalid_argument("edge_weight must be >= 1");
  }
  LossMatrix weights(e.height(), e.width());
  for (std::size_t i = 0; i < e.size(); ++i) {
    weights[i] = e[i] ? edge_weight : 1.0;
  }
  return weights;
}

namespace detail {

inline double clamp_prob(double p, double eps) {
  return std::min(std::max(p, eps), 1.0 - eps);
}

inline double bce_term(std::uint8_t y, double p, double eps) {
  const double q = clamp_prob(p, eps);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

inline void require_same_shape(const BinaryMask& y, const ProbMask& yhat) {
  if (!y.grid().same_shape(yhat.grid())) {
    throw std::invalid_argument("label and prediction dimensions differ");
  }
}

/// Indices of the k largest values, ties resolved toward lower raster
/// index. Returned ascending.
inline std::vector<std::size_t> select_hard(const std::vector<double>& values,
                                            std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

struct EedmEval {
  EedmResult result;
  GradMatrix gradient;
};

inline EedmEval eedm_eval(const BinaryMask& y, const ProbMask& yhat,
                          const LossConfig& cfg, bool want_gradient) {
  cfg.validate();
  require_same_shape(y, yhat);
  const std::size_t n = y.size();

  const EdgeMap edges = extract_edge_map(y);
  std::vector<double> weighted(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = edges[i] ? cfg.edge_weight : 1.0;
    weighted[i] = w * bce_term(y[i], yhat[i], cfg.clamp_eps);
  }

  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(cfg.mining_ratio * static_cast<double>(n))));

  EedmEval eval;
  eval.result.kept = select_hard(weighted, k);
  double sum = 0.0;
  for (std::size_t i : eval.result.kept) sum += weighted[i];
  eval.result.loss = sum / static_cast<double>(k);

  if (want_gradient) {
    eval.gradient = GradMatrix(y.height(), y.width(), 0.0);
    for (std::size_t i : eval.result.kept) {
      const double p = yhat[i];
      if (p <= cfg.clamp_eps || p >= 1.0 - cfg.clamp_eps) continue;  // clamp active
      const double w = edges[i] ? cfg.edge_weight : 1.0;
      eval.gradient[i] =
          w * (p - static_cast<double>(y[i])) / (p * (1.0 - p)) / static_cast<double>(k);
    }
  }
  return eval;
}

}  // namespace detail

/// Per-pixel clamped binary cross-entropy.
inline LossMatrix bce_matrix(const BinaryMask& y, const ProbMask& yhat,
                             double eps = 1e-7) {
  detail::require_same_shape(y, yhat);
  LossMatrix loss(y.height(), y.width());
  for (std::size_t i = 0; i < y.size(); ++i) {
    loss[i] = detail::bce_term(y[i], yhat[i], eps);
  }
  return loss;
}

inline EedmResult eedm_loss(const BinaryMask& y, const ProbMask& yhat,
                            const LossConfig& cfg = {}) {
  return detail::eedm_eval(y, yhat, cfg, /*want_gradient=*/false).result;
}

/// Edge-weighting only: every pixel kept.
inline double ee_loss(const BinaryMask& y, const ProbMask& yhat,
                      double edge_weight = 4.0) {
  return eedm_loss(y, yhat, LossConfig{edge_weight, 1.0, 1e-7}).loss;
}

/// Hard-pixel mining only: no edge weighting.
inline double dm_loss(const BinaryMask& y, const ProbMask& yhat,
                      double mining_ratio = 0.5) {
  return eedm_loss(y, yhat, LossConfig{1.0, mining_ratio, 1e-7}).loss;
}

inline GradMatrix eedm_gradient(const BinaryMask& y, const ProbMask& yhat,
                                const LossConfig& cfg = {}) {
  return detail::eedm_eval(y, yhat, cfg, /*want_gradient=*/true).gradient;
}

/// Loss and gradient in one evaluation (shared hard-pixel selection).
inline std::pair<EedmResult, GradMatrix> eedm_loss_and_gradient(
    const BinaryMask& y, const ProbMask& yhat, const LossConfig& cfg = {}) {
  auto eval = detail::eedm_eval(y, yhat, cfg, /*want_gradient=*/true);
  return {std::move(eval.result), std::move(eval.gradient)};
}

}  // namespace fest
