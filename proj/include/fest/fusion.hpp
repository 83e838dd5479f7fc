#pragma once

// Multi-scale inference orchestration: resample the input to each scale,
// obtain a prediction per scale through an abstract predictor port,
// resample the predictions back to the original size, and fuse them
// pixel-wise (mean by default, max as an ablation mode).
//
// The predictor port keeps heavy model runtimes out of this library: a
// predictor is either a directory of precomputed masks laid out as
// <root>/<image-id>/<scale>.pgm, or an external command invoked as
// `CMD <in.pgm> <out.pgm>` per image (both files 16-bit PGM), or any
// in-process callable for tests.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fest/raster.hpp"

namespace fest {

/// Square inference side lengths, e.g. {768, 896, 1024}.
class ScaleSet {
 public:
  explicit ScaleSet(std::vector<int> scales) : scales_(std::move(scales)) {
    if (scales_.empty()) {
      throw std::invalid_argument("ScaleSet: at least one scale required");
    }
    std::set<int> seen;
    for (int s : scales_) {
      if (s <= 0) throw std::invalid_argument("ScaleSet: scales must be positive");
      if (!seen.insert(s).second) {
        throw std::invalid_argument("ScaleSet: duplicate scale " + std::to_string(s));
      }
    }
  }

  const std::vector<int>& values() const { return scales_; }
  std::size_t size() const { return scales_.size(); }
  auto begin() const { return scales_.begin(); }
  auto end() const { return scales_.end(); }

 private:
  std::vector<int> scales_;
};

enum class FusionMode { mean, max };

/// Center-aligned bilinear resampling. Source coordinate for output index d
/// is (d + 0.5) * src_len / dst_len - 0.5, clamped to the valid range.
/// Works on any grid type constructible from (height, width, vector<double>).
template <typename M>
M resample_bilinear(const M& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("resample_bilinear: output dims must be positive");
  }
  const int in_h = src.height();
  const int in_w = src.width();

  struct Axis {
    int lo, hi;
    double frac;
  };
  auto map_axis = [](int dst, int dst_len, int src_len) {
    double s = (dst + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
    if (s < 0.0) s = 0.0;
    const double max_s = static_cast<double>(src_len - 1);
    if (s > max_s) s = max_s;
    const int lo = static_cast<int>(s);
    const int hi = std::min(lo + 1, src_len - 1);
    return Axis{lo, hi, s - lo};
  };

  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int r = 0; r < out_h; ++r) {
    const Axis ay = map_axis(r, out_h, in_h);
    for (int c = 0; c < out_w; ++c) {
      const Axis ax = map_axis(c, out_w, in_w);
      // Two lerps; exact for constant grids and for same-size resampling.
      const double top = src.at(ay.lo, ax.lo) +
                         ax.frac * (src.at(ay.lo, ax.hi) - src.at(ay.lo, ax.lo));
      const double bot = src.at(ay.hi, ax.lo) +
                         ax.frac * (src.at(ay.hi, ax.hi) - src.at(ay.hi, ax.lo));
      double v = top + ay.frac * (bot - top);
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      out[static_cast<std::size_t>(r) * out_w + c] = v;
    }
  }
  return M(out_h, out_w, std::move(out));
}

/// Pixel-wise mean or max of equally sized probability maps.
inline ProbMask fuse(const std::vector<ProbMask>& maps, FusionMode mode) {
  if (maps.empty()) {
    throw std::invalid_argument("fuse: empty input list");
  }
  for (const ProbMask& m : maps) {
    if (!m.grid().same_shape(maps.front().grid())) {
      throw std::invalid_argument("fuse: dimension mismatch");
    }
  }
  const std::size_t n = maps.front().size();
  std::vector<double> out(n, 0.0);
  if (mode == FusionMode::max) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = maps.front()[i];
      for (std::size_t m = 1; m < maps.size(); ++m) v = std::max(v, maps[m][i]);
      out[i] = v;
    }
  } else {
    const double inv = 1.0 / static_cast<double>(maps.size());
    std::vector<double> column(maps.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < maps.size(); ++m) column[m] = maps[m][i];
      // Accumulate in sorted order so the mean is exactly invariant under
      // permutation of the input list.
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      double v = sum * inv;
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      out[i] = v;
    }
  }
  return ProbMask(maps.front().height(), maps.front().width(), std::move(out));
}

/// Single-image predictor: takes the input already resampled to
/// scale x scale and must return a probability mask of exactly that size.
class PredictorPort {
 public:
  virtual ~PredictorPort() = default;
  virtual ProbMask predict(const GrayImage& scaled,
                           const std::string& image_id, int scale) = 0;
};

/// Reads precomputed masks from <root>/<image-id>/<scale>.pgm.
class DirectoryPredictor final : public PredictorPort {
 public:
  explicit DirectoryPredictor(std::filesystem::path root)
      : root_(std::move(root)) {}

  ProbMask predict(const GrayImage&, const std::string& image_id,
                   int scale) override {
    const auto path = root_ / image_id / (std::to_string(scale) + ".pgm");
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("predictor mask not found: " + path.string());
    }
    return read_prob_mask(path);
  }

 private:
  std::filesystem::path root_;
};

/// Invokes `command <in.pgm> <out.pgm>`. The input is written as a 16-bit
/// PGM so resampled intensities keep their precision; the command must
/// write a 16-bit PGM of the same size.
class CommandPredictor final : public PredictorPort {
 public:
  explicit CommandPredictor(std::string command,
                            std::filesystem::path work_dir =
                                std::filesystem::temp_directory_path())
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

  ProbMask predict(const GrayImage& scaled, const std::string& image_id,
                   int scale) override {
    static std::atomic<unsigned> counter{0};
    const unsigned tag = counter.fetch_add(1);
    const std::string stem = "fest_pred_" + image_id + "_" +
                             std::to_string(scale) + "_" + std::to_string(tag);
    const auto in_path = work_dir_ / (stem + "_in.pgm");
    const auto out_path = work_dir_ / (stem + "_out.pgm");
    write_mask(ProbMask(scaled.height(), scaled.width(), scaled.data()), in_path);
    const std::string cmd =
        command_ + " '" + in_path.string() + "' '" + out_path.string() + "'";
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      std::filesystem::remove(in_path);
      throw std::runtime_error("predictor command failed (exit " +
                               std::to_string(status) + "): " + cmd);
    }
    ProbMask result = read_prob_mask(out_path);
    std::filesystem::remove(in_path);
    std::filesystem::remove(out_path);
    return result;
  }

 private:
  std::string command_;
  std::filesystem::path work_dir_;
};

/// Wraps any callable; intended for in-process stubs.
class FunctionPredictor final : public PredictorPort {
 public:
  using Fn = std::function<ProbMask(const GrayImage&, const std::string&, int)>;
  explicit FunctionPredictor(Fn fn) : fn_(std::move(fn)) {}

  ProbMask predict(const GrayImage& scaled, const std::string& image_id,
                   int scale) override {
    return fn_(scaled, image_id, scale);
  }

 private:
  Fn fn_;
};

/// Full multi-scale pass: per scale, resample the image, predict, resample
/// the prediction back to the input size; then fuse. Output dimensions
/// always equal the input dimensions. A predictor failure aborts with the
/// offending scale in the message.
inline ProbMask run_multiscale(const GrayImage& image,
                               const std::string& image_id,
                               const ScaleSet& scales, PredictorPort& predictor,
                               FusionMode mode) {
  std::vector<ProbMask> aligned;
  aligned.reserve(scales.size());
  for (int s : scales) {
    ProbMask pred;
    try {
      const GrayImage scaled = resample_bilinear(image, s, s);
      pred = predictor.predict(scaled, image_id, s);
    } catch (const std::exception& e) {
      throw std::runtime_error("scale " + std::to_string(s) + ": " + e.what());
    }
    if (pred.height() != s || pred.width() != s) {
      throw std::runtime_error("scale " + std::to_string(s) +
                               ": predictor returned " +
                               std::to_string(pred.height()) + "x" +
                               std::to_string(pred.width()) +
                               ", expected " + std::to_string(s) + "x" +
                               std::to_string(s));
    }
    aligned.push_back(resample_bilinear(pred, image.height(), image.width()));
  }
  return fuse(aligned, mode);
}

}  // namespace fest
