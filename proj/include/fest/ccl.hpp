#pragma once

// Connected-component labeling and per-component geometry.
//
// Labeling is iterative two-pass union-find, so large masks cannot overflow
// the call stack. Component ids are 1..K, assigned in raster-scan order of
// each component's first pixel; id 0 is background. The same input always
// yields the same LabelMap, including id order.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fest/raster.hpp"

namespace fest {

enum class Connectivity { four = 4, eight = 8 };

struct BoundingBox {
  int min_row = 0;
  int min_col = 0;
  int max_row = 0;
  int max_col = 0;
};

struct ComponentStat {
  int id = 0;
  std::int64_t pixel_count = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  BoundingBox bbox;
};

class LabelMap {
 public:
  LabelMap(int height, int width, std::vector<std::int32_t> labels,
           std::vector<ComponentStat> components)
      : grid_(height, width, std::move(labels)),
        components_(std::move(components)) {}

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  std::int32_t label_at(int r, int c) const { return grid_.at(r, c); }
  std::int32_t operator[](std::size_t i) const { return grid_[i]; }
  const std::vector<std::int32_t>& labels() const { return grid_.data(); }
  const std::vector<ComponentStat>& components() const { return components_; }
  int component_count() const { return static_cast<int>(components_.size()); }

  const ComponentStat& component(int id) const {
    if (id < 1 || id > component_count()) {
      throw std::out_of_range("unknown component id " + std::to_string(id));
    }
    return components_[static_cast<std::size_t>(id) - 1];
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.grid_ == b.grid_;
  }

 private:
  Grid<std::int32_t> grid_;
  std::vector<ComponentStat> components_;
};

namespace detail {

inline std::int32_t uf_find(std::vector<std::int32_t>& parent, std::int32_t x) {
  std::int32_t root = x;
  while (parent[root] != root) root = parent[root];
  while (parent[x] != root) {  // path compression
    std::int32_t next = parent[x];
    parent[x] = root;
    x = next;
  }
  return root;
}

inline void uf_union(std::vector<std::int32_t>& parent, std::int32_t a,
                     std::int32_t b) {
  a = uf_find(parent, a);
  b = uf_find(parent, b);
  if (a != b) parent[std::max(a, b)] = std::min(a, b);
}

}  // namespace detail

inline LabelMap label_components(const BinaryMask& mask,
                                 Connectivity connectivity = Connectivity::eight) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<std::int32_t> provisional(mask.size(), 0);
  std::vector<std::int32_t> parent;
  parent.push_back(0);  // slot for background, never used

  // First pass: provisional labels from already-scanned neighbors.
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      std::int32_t best = 0;
      auto consider = [&](int rr, int cc) {
        if (rr < 0 || cc < 0 || cc >= w) return;
        const std::int32_t lbl = provisional[static_cast<std::size_t>(rr) * w + cc];
        if (!lbl) return;
        if (!best) {
          best = lbl;
        } else {
          detail::uf_union(parent, best, lbl);
        }
      };
      consider(r, c - 1);
      consider(r - 1, c);
      if (connectivity == Connectivity::eight) {
        consider(r - 1, c - 1);
        consider(r - 1, c + 1);
      }
      if (!best) {
        best = static_cast<std::int32_t>(parent.size());
        parent.push_back(best);
      }
      provisional[i] = best;
    }
  }

  // Second pass: resolve roots, assign final ids in raster order of first
  // pixel, and accumulate component statistics.
  std::vector<std::int32_t> final_id(parent.size(), 0);
  std::vector<std::int32_t> labels(mask.size(), 0);
  std::vector<ComponentStat> stats;
  std::vector<std::int64_t> row_sum, col_sum;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (!provisional[i]) continue;
      const std::int32_t root = detail::uf_find(parent, provisional[i]);
      std::int32_t id = final_id[root];
      if (!id) {
        id = static_cast<std::int32_t>(stats.size()) + 1;
        final_id[root] = id;
        ComponentStat s;
        s.id = id;
        s.bbox = BoundingBox{r, c, r, c};
        stats.push_back(s);
        row_sum.push_back(0);
        col_sum.push_back(0);
      }
      labels[i] = id;
      ComponentStat& s = stats[static_cast<std::size_t>(id) - 1];
      s.pixel_count += 1;
      row_sum[static_cast<std::size_t>(id) - 1] += r;
      col_sum[static_cast<std::size_t>(id) - 1] += c;
      s.bbox.min_row = std::min(s.bbox.min_row, r);
      s.bbox.min_col = std::min(s.bbox.min_col, c);
      s.bbox.max_row = std::max(s.bbox.max_row, r);
      s.bbox.max_col = std::max(s.bbox.max_col, c);
    }
  }
  for (std::size_t k = 0; k < stats.size(); ++k) {
    stats[k].centroid_row =
        static_cast<double>(row_sum[k]) / static_cast<double>(stats[k].pixel_count);
    stats[k].centroid_col =
        static_cast<double>(col_sum[k]) / static_cast<double>(stats[k].pixel_count);
  }
  return LabelMap(h, w, std::move(labels), std::move(stats));
}

/// Indicator mask of one component, same dimensions as the source.
inline BinaryMask component_mask(const LabelMap& lm, int id) {
  lm.component(id);  // validates id
  std::vector<std::uint8_t> values(lm.labels().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = lm[i] == id ? 1 : 0;
  }
  return BinaryMask(lm.height(), lm.width(), std::move(values));
}

/// Arithmetic mean of the component's pixel coordinates, as (row, col).
inline std::pair<double, double> centroid(const LabelMap& lm, int id) {
  const ComponentStat& s = lm.component(id);
  return {s.centroid_row, s.centroid_col};
}

/// True iff some pixel is foreground in both masks.
inline bool overlaps(const BinaryMask& a, const BinaryMask& b) {
  if (!a.grid().same_shape(b.grid())) {
    throw std::invalid_argument("overlaps: dimension mismatch");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) return true;
  }
  return false;
}

}  // namespace fest
