#pragma once

// Minimal trainable per-pixel segmenter: a logistic model over five
// handcrafted local features (raw intensity, 3x3 mean, 3x3 max, center
// minus ring contrast, constant bias), optimized by full-batch gradient
// descent. Full batch keeps trajectories exactly reproducible, which is
// what makes the loss-degeneracy identities testable end to end. The loss
// gradient flows through the mined hard-pixel set of the EEDM loss (or its
// ablation variants), then through the logistic.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fest/eedm.hpp"
#include "fest/raster.hpp"
#include "fest/synth.hpp"

namespace fest {

inline constexpr int kFeatureCount = 5;

struct FeatureStack {
  int height = 0;
  int width = 0;
  std::array<Grid<double>, kFeatureCount> planes;
};

/// Border handling is edge replication.
inline FeatureStack extract_features(const GrayImage& image) {
  const int h = image.height();
  const int w = image.width();
  FeatureStack fs;
  fs.height = h;
  fs.width = w;
  for (auto& p : fs.planes) p = Grid<double>(h, w, 0.0);

  auto pixel = [&](int r, int c) {
    r = std::max(0, std::min(h - 1, r));
    c = std::max(0, std::min(w - 1, c));
    return image.at(r, c);
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double center = image.at(r, c);
      double sum = 0.0;
      double mx = 0.0;
      double ring = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const double v = pixel(r + dr, c + dc);
          sum += v;
          mx = std::max(mx, v);
          if (dr || dc) ring += v;
        }
      }
      fs.planes[0].at(r, c) = center;
      fs.planes[1].at(r, c) = sum / 9.0;
      fs.planes[2].at(r, c) = mx;
      fs.planes[3].at(r, c) = center - ring / 8.0;
      fs.planes[4].at(r, c) = 1.0;
    }
  }
  return fs;
}

enum class LossKind { bce, ee, dm, eedm };

inline LossKind parse_loss_kind(const std::string& name) {
  if (name == "bce") return LossKind::bce;
  if (name == "ee") return LossKind::ee;
  if (name == "dm") return LossKind::dm;
  if (name == "eedm") return LossKind::eedm;
  throw std::invalid_argument("unknown loss kind: " + name);
}

struct TrainConfig {
  LossKind loss = LossKind::eedm;
  double edge_weight = 4.0;
  double mining_ratio = 0.5;
  double learning_rate = 0.5;
  int epochs = 200;
  std::uint64_t seed = 0;  // reserved; weights start at zero

  void validate() const {
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    }
    if (epochs < 1) {
      throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    }
    loss_config();  // range checks on (w, p)
  }

  /// The single loss implementation covers all four kinds through its
  /// degenerate corners.
  LossConfig loss_config() const {
    switch (loss) {
      case LossKind::bce:
        return LossConfig{1.0, 1.0, 1e-7};
      case LossKind::ee:
        return LossConfig{edge_weight, 1.0, 1e-7};
      case LossKind::dm:
        return LossConfig{1.0, mining_ratio, 1e-7};
      case LossKind::eedm:
        return LossConfig{edge_weight, mining_ratio, 1e-7};
    }
    throw std::invalid_argument("unknown loss kind");
  }
};

struct ToyModel {
  std::array<double, kFeatureCount> weights{};
  std::vector<double> training_log;  // loss at the start of each epoch
};

struct TrainingExample {
  GrayImage image;
  BinaryMask label;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

inline ProbMask toy_forward(const FeatureStack& fs,
                            const std::array<double, kFeatureCount>& weights) {
  const std::size_t n = static_cast<std::size_t>(fs.height) * fs.width;
  std::vector<double> prob(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (int j = 0; j < kFeatureCount; ++j) z += weights[j] * fs.planes[j][i];
    prob[i] = sigmoid(z);
  }
  return ProbMask(fs.height, fs.width, std::move(prob));
}

}  // namespace detail

inline ToyModel train_toy(const std::vector<TrainingExample>& examples,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) {
    throw std::invalid_argument("train_toy: empty training set");
  }
  const LossConfig loss_cfg = cfg.loss_config();

  std::vector<FeatureStack> features;
  features.reserve(examples.size());
  for (const TrainingExample& ex : examples) {
    if (!ex.image.grid().same_shape(ex.label.grid())) {
      throw std::invalid_argument("train_toy: image and label dimensions differ");
    }
    features.push_back(extract_features(ex.image));
  }

  ToyModel model;
  const double inv_m = 1.0 / static_cast<double>(examples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double batch_loss = 0.0;
    std::array<double, kFeatureCount> grad{};
    for (std::size_t m = 0; m < examples.size(); ++m) {
      const ProbMask prob = detail::toy_forward(features[m], model.weights);
      const auto [result, pixel_grad] =
          eedm_loss_and_gradient(examples[m].label, prob, loss_cfg);
      batch_loss += result.loss;
      for (std::size_t i : result.kept) {
        const double g = pixel_grad[i];
        if (g == 0.0) continue;
        const double dz = g * prob[i] * (1.0 - prob[i]);
        for (int j = 0; j < kFeatureCount; ++j) {
          grad[j] += dz * features[m].planes[j][i];
        }
      }
    }
    batch_loss *= inv_m;
    if (!std::isfinite(batch_loss)) {
      throw std::runtime_error("train_toy: loss diverged at epoch " +
                               std::to_string(epoch));
    }
    model.training_log.push_back(batch_loss);
    for (int j = 0; j < kFeatureCount; ++j) {
      model.weights[j] -= cfg.learning_rate * grad[j] * inv_m;
      if (!std::isfinite(model.weights[j])) {
        throw std::runtime_error("train_toy: weights diverged at epoch " +
                                 std::to_string(epoch));
      }
    }
  }
  return model;
}

inline ToyModel train_toy(const std::vector<SynthCase>& cases,
                          const TrainConfig& cfg) {
  std::vector<TrainingExample> examples;
  examples.reserve(cases.size());
  for (const SynthCase& c : cases) {
    examples.push_back(TrainingExample{c.image, c.gt});
  }
  return train_toy(examples, cfg);
}

inline ProbMask predict_toy(const ToyModel& model, const GrayImage& image) {
  return detail::toy_forward(extract_features(image), model.weights);
}

/// Plain text, one weight per line.
inline void save_model(const ToyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write model file: " + path.string());
  }
  out.precision(17);
  for (double w : model.weights) out << w << "\n";
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

inline ToyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open model file: " + path.string());
  }
  ToyModel model;
  for (int j = 0; j < kFeatureCount; ++j) {
    if (!(in >> model.weights[j]) || !std::isfinite(model.weights[j])) {
      throw std::runtime_error("malformed model file: " + path.string());
    }
  }
  return model;
}

}  // namespace fest
