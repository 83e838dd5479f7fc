#include "fest/eedm.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fest/rng.hpp"

using namespace fest;

namespace {

BinaryMask random_label(SplitMix64& rng, int h, int w, double density = 0.3) {
  std::vector<std::uint8_t> values(static_cast<std::size_t>(h) * w);
  for (auto& v : values) v = rng.next_unit() < density ? 1 : 0;
  return BinaryMask(h, w, values);
}

ProbMask random_prob(SplitMix64& rng, int h, int w, double lo = 0.002,
                     double hi = 0.998) {
  std::vector<double> values(static_cast<std::size_t>(h) * w);
  for (double& v : values) v = rng.next_uniform(lo, hi);
  return ProbMask(h, w, values);
}

// Scalar reference: straight transcription of the weighted-BCE-with-mining
// recipe using plain loops, kept independent of the library internals.
double oracle_bce(int y, double p, double eps) {
  const double q = std::min(std::max(p, eps), 1.0 - eps);
  return -(y * std::log(q) + (1 - y) * std::log(1.0 - q));
}

std::vector<double> oracle_weighted(const BinaryMask& y, const ProbMask& yhat,
                                    double w, double eps) {
  const int h = y.height();
  const int width = y.width();
  std::vector<double> out(y.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < width; ++c) {
      bool edge = false;
      if (y.at(r, c)) {
        auto bg = [&](int rr, int cc) {
          return rr < 0 || rr >= h || cc < 0 || cc >= width || !y.at(rr, cc);
        };
        edge = bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1);
      }
      const std::size_t i = static_cast<std::size_t>(r) * width + c;
      out[i] = (edge ? w : 1.0) * oracle_bce(y[i], yhat[i], eps);
    }
  }
  return out;
}

double oracle_eedm(const BinaryMask& y, const ProbMask& yhat, double w,
                   double p, double eps = 1e-7) {
  std::vector<double> weighted = oracle_weighted(y, yhat, w, eps);
  const std::size_t n = weighted.size();
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(p * static_cast<double>(n))));
  std::vector<double> sorted = weighted;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
  return sum / static_cast<double>(k);
}

TEST(ExtractEdgeMap, FullBlockHasHollowCenter) {
  const BinaryMask label(3, 3, std::vector<std::uint8_t>(9, 1));
  const EdgeMap e = extract_edge_map(label);
  EXPECT_EQ(e.foreground_count(), 8);
  EXPECT_EQ(e.at(1, 1), 0);
}

TEST(ExtractEdgeMap, SinglePixelIsEdge) {
  std::vector<std::uint8_t> values(25, 0);
  values[12] = 1;
  const EdgeMap e = extract_edge_map(BinaryMask(5, 5, values));
  EXPECT_EQ(e.foreground_count(), 1);
  EXPECT_EQ(e.at(2, 2), 1);
}

// Edge set equals foreground minus its 4-erosion (border counts as
// background).
TEST(ExtractEdgeMap, MatchesErosionOracle) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask label = random_label(rng, 12, 12, 0.5);
    const EdgeMap e = extract_edge_map(label);
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) {
        auto fg = [&](int rr, int cc) {
          return rr >= 0 && rr < 12 && cc >= 0 && cc < 12 && label.at(rr, cc);
        };
        const bool eroded = fg(r, c) && fg(r - 1, c) && fg(r + 1, c) &&
                            fg(r, c - 1) && fg(r, c + 1);
        const bool expected = label.at(r, c) && !eroded;
        ASSERT_EQ(e.at(r, c), expected ? 1 : 0);
      }
    }
  }
}

TEST(ExtractEdgeMap, EdgeIsSubsetOfForeground) {
  SplitMix64 rng(12);
  const BinaryMask label = random_label(rng, 16, 16, 0.4);
  const EdgeMap e = extract_edge_map(label);
  for (std::size_t i = 0; i < label.size(); ++i) {
    EXPECT_TRUE(!e[i] || label[i]);
  }
}

TEST(EdgeWeightMatrix, HandCases) {
  const EdgeMap e(1, 2, {0, 1});
  const LossMatrix w = edge_weight_matrix(e, 4.0);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 4.0);

  const LossMatrix ones = edge_weight_matrix(e, 1.0);
  EXPECT_DOUBLE_EQ(ones[0], 1.0);
  EXPECT_DOUBLE_EQ(ones[1], 1.0);

  EXPECT_THROW(edge_weight_matrix(e, 0.5), std::invalid_argument);
}

TEST(EdgeWeightMatrix, CodomainIsOneOrW) {
  SplitMix64 rng(13);
  const BinaryMask label = random_label(rng, 10, 10, 0.5);
  const LossMatrix w = edge_weight_matrix(extract_edge_map(label), 3.5);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_TRUE(w[i] == 1.0 || w[i] == 3.5);
  }
}

TEST(BceMatrix, HandCases) {
  const BinaryMask y(1, 1, {1});
  const ProbMask half(1, 1, {0.5});
  EXPECT_NEAR(bce_matrix(y, half)[0], std::log(2.0), 1e-12);

  const BinaryMask zero_label(1, 1, {0});
  const ProbMask zero_prob(1, 1, {0.0});
  const double eps = 1e-7;
  EXPECT_DOUBLE_EQ(bce_matrix(zero_label, zero_prob, eps)[0], -std::log(1.0 - eps));

  EXPECT_THROW(bce_matrix(BinaryMask(1, 2, {0, 1}), half), std::invalid_argument);
}

TEST(BceMatrix, MatchesScalarOracle) {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask y = random_label(rng, 6, 7);
    const ProbMask p = random_prob(rng, 6, 7, 0.0, 1.0);
    const LossMatrix loss = bce_matrix(y, p);
    for (std::size_t i = 0; i < y.size(); ++i) {
      ASSERT_NEAR(loss[i], oracle_bce(y[i], p[i], 1e-7), 1e-12);
    }
  }
}

// Brute-force recomputation of the documented 1x4 example. The two label
// pixels form the inner boundary, so both carry weight w.
TEST(EedmLoss, WorkedExample) {
  const BinaryMask y(1, 4, {0, 0, 1, 1});
  const ProbMask p(1, 4, {0.2, 0.8, 0.9, 0.4});
  const LossConfig cfg{4.0, 0.5, 1e-7};

  const EedmResult r = eedm_loss(y, p, cfg);
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{1, 3}));
  const double expected =
      (4.0 * -std::log(0.4) + -std::log(1.0 - 0.8)) / 2.0;
  EXPECT_NEAR(r.loss, expected, 1e-12);
  EXPECT_NEAR(r.loss, 2.6373, 5e-4);
  EXPECT_NEAR(r.loss, oracle_eedm(y, p, 4.0, 0.5), 1e-15);
}

TEST(EedmLoss, DoubleDegeneracyIsMeanBce) {
  SplitMix64 rng(15);
  const BinaryMask y = random_label(rng, 8, 8);
  const ProbMask p = random_prob(rng, 8, 8);
  const double loss = eedm_loss(y, p, LossConfig{1.0, 1.0, 1e-7}).loss;
  const LossMatrix bce = bce_matrix(y, p);
  double mean = 0.0;
  for (std::size_t i = 0; i < bce.size(); ++i) mean += bce[i];
  mean /= static_cast<double>(bce.size());
  EXPECT_DOUBLE_EQ(loss, mean);
}

TEST(EedmLoss, PerfectPredictionBound) {
  const BinaryMask y(2, 2, {1, 0, 0, 1});
  std::vector<double> exact(4);
  for (std::size_t i = 0; i < 4; ++i) exact[i] = y[i];
  const ProbMask p(2, 2, exact);
  const LossConfig cfg{4.0, 0.5, 1e-7};
  EXPECT_LE(eedm_loss(y, p, cfg).loss, -std::log(1.0 - 1e-7) * 4.0 + 1e-18);
}

TEST(EedmLoss, MatchesOracleOnRandomInstances) {
  SplitMix64 rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 2 + static_cast<int>(rng.next_u64() % 7);
    const int w = 2 + static_cast<int>(rng.next_u64() % 7);
    const BinaryMask y = random_label(rng, h, w);
    const ProbMask p = random_prob(rng, h, w);
    const double weight = 1.0 + 6.0 * rng.next_unit();
    const double ratio = 0.05 + 0.95 * rng.next_unit();
    const double got = eedm_loss(y, p, LossConfig{weight, ratio, 1e-7}).loss;
    ASSERT_NEAR(got, oracle_eedm(y, p, weight, ratio), 1e-12);
    ASSERT_GE(got, 0.0);
    ASSERT_TRUE(std::isfinite(got));
  }
}

TEST(EedmLoss, KeptSetSizeIsExact) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + static_cast<int>(rng.next_u64() % 8);
    const int w = 1 + static_cast<int>(rng.next_u64() % 8);
    const BinaryMask y = random_label(rng, h, w);
    const ProbMask p = random_prob(rng, h, w);
    const double ratio = rng.next_unit() * 0.999 + 0.001;
    const auto kept = eedm_loss(y, p, LossConfig{2.0, ratio, 1e-7}).kept;
    const std::size_t expected = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(y.size()))));
    ASSERT_EQ(kept.size(), expected);
  }
}

TEST(EedmLoss, TiesKeepLowerRasterIndex) {
  // Identical losses everywhere: the kept set must be the first k indices.
  const BinaryMask y(1, 4, {0, 0, 0, 0});
  const ProbMask p(1, 4, {0.3, 0.3, 0.3, 0.3});
  const auto kept = eedm_loss(y, p, LossConfig{1.0, 0.5, 1e-7}).kept;
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 1}));
}

TEST(EedmLoss, IncreasingWWeaklyIncreasesLoss) {
  SplitMix64 rng(18);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask y = random_label(rng, 8, 8, 0.4);
    const ProbMask p = random_prob(rng, 8, 8);
    double prev = eedm_loss(y, p, LossConfig{1.0, 0.5, 1e-7}).loss;
    for (double w : {2.0, 4.0, 8.0}) {
      const double cur = eedm_loss(y, p, LossConfig{w, 0.5, 1e-7}).loss;
      ASSERT_GE(cur, prev - 1e-12);
      prev = cur;
    }
  }
}

TEST(EedmLoss, ErrorsOnBadInput) {
  const BinaryMask y(1, 2, {0, 1});
  const ProbMask p(2, 1, {0.5, 0.5});
  EXPECT_THROW(eedm_loss(y, p, LossConfig{}), std::invalid_argument);
  const ProbMask q(1, 2, {0.5, 0.5});
  EXPECT_THROW(eedm_loss(y, q, LossConfig{0.5, 0.5, 1e-7}), std::invalid_argument);
  EXPECT_THROW(eedm_loss(y, q, LossConfig{1.0, 0.0, 1e-7}), std::invalid_argument);
  EXPECT_THROW(eedm_loss(y, q, LossConfig{1.0, 1.1, 1e-7}), std::invalid_argument);
  EXPECT_THROW(eedm_loss(y, q, LossConfig{1.0, 0.5, 0.7}), std::invalid_argument);
}

TEST(AblationVariants, ExactDegeneracies) {
  SplitMix64 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask y = random_label(rng, 7, 9);
    const ProbMask p = random_prob(rng, 7, 9);
    const double w = 1.0 + 5.0 * rng.next_unit();
    const double ratio = 0.05 + 0.95 * rng.next_unit();

    ASSERT_EQ(ee_loss(y, p, w), eedm_loss(y, p, LossConfig{w, 1.0, 1e-7}).loss);
    ASSERT_EQ(dm_loss(y, p, ratio),
              eedm_loss(y, p, LossConfig{1.0, ratio, 1e-7}).loss);
    ASSERT_NEAR(ee_loss(y, p, w), oracle_eedm(y, p, w, 1.0), 1e-12);
    ASSERT_NEAR(dm_loss(y, p, ratio), oracle_eedm(y, p, 1.0, ratio), 1e-12);
  }
}

TEST(AblationVariants, PlainMeanBceCorners) {
  SplitMix64 rng(20);
  const BinaryMask y = random_label(rng, 6, 6);
  const ProbMask p = random_prob(rng, 6, 6);
  const double mean_bce = eedm_loss(y, p, LossConfig{1.0, 1.0, 1e-7}).loss;
  EXPECT_EQ(ee_loss(y, p, 1.0), mean_bce);
  EXPECT_EQ(dm_loss(y, p, 1.0), mean_bce);
}

TEST(EedmGradient, SinglePixelAnalytic) {
  const BinaryMask y(1, 1, {1});
  const ProbMask p(1, 1, {0.5});
  const GradMatrix g = eedm_gradient(y, p, LossConfig{1.0, 1.0, 1e-7});
  EXPECT_NEAR(g[0], -2.0, 1e-12);
}

TEST(EedmGradient, UnkeptPixelsAreExactlyZero) {
  SplitMix64 rng(21);
  const BinaryMask y = random_label(rng, 8, 8);
  const ProbMask p = random_prob(rng, 8, 8);
  const LossConfig cfg{4.0, 0.25, 1e-7};
  const auto [result, grad] = eedm_loss_and_gradient(y, p, cfg);
  std::vector<bool> kept(y.size(), false);
  for (std::size_t i : result.kept) kept[i] = true;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!kept[i]) ASSERT_EQ(grad[i], 0.0);
  }
}

TEST(EedmGradient, ZeroWhereClampActive) {
  const BinaryMask y(1, 2, {1, 0});
  const ProbMask p(1, 2, {0.0, 1.0});
  const GradMatrix g = eedm_gradient(y, p, LossConfig{1.0, 1.0, 1e-7});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(EedmGradient, SignConvention) {
  SplitMix64 rng(22);
  const BinaryMask y = random_label(rng, 8, 8);
  const ProbMask p = random_prob(rng, 8, 8);
  const LossConfig cfg{4.0, 0.5, 1e-7};
  const auto [result, grad] = eedm_loss_and_gradient(y, p, cfg);
  for (std::size_t i : result.kept) {
    if (y[i]) {
      ASSERT_LT(grad[i], 0.0);
    } else {
      ASSERT_GT(grad[i], 0.0);
    }
  }
}

// Central finite differences on the loss with the hard set frozen at the
// base point. The frozen-set loss is a sum of independent per-pixel terms
// over k, so the directional difference in pixel i reduces to the
// difference of pixel i's own weighted term.
TEST(EedmGradient, MatchesFiniteDifferences) {
  SplitMix64 rng(23);
  const double h_step = 1e-5;
  const LossConfig cfg{4.0, 0.5, 1e-7};
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask y = random_label(rng, 8, 8);
    const ProbMask p = random_prob(rng, 8, 8);
    const auto [result, grad] = eedm_loss_and_gradient(y, p, cfg);
    const double k = static_cast<double>(result.kept.size());

    // Oracle edge rule: label pixel with a background 4-neighbor (image
    // border counts as background).
    auto oracle_weight = [&](std::size_t i) {
      const int r = static_cast<int>(i) / y.width();
      const int c = static_cast<int>(i) % y.width();
      if (!y.at(r, c)) return 1.0;
      auto bg = [&](int rr, int cc) {
        return rr < 0 || rr >= y.height() || cc < 0 || cc >= y.width() ||
               !y.at(rr, cc);
      };
      const bool edge =
          bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1);
      return edge ? cfg.edge_weight : 1.0;
    };

    for (std::size_t i : result.kept) {
      const double w_pix = oracle_weight(i);
      const double up = w_pix * oracle_bce(y[i], p[i] + h_step, cfg.clamp_eps);
      const double dn = w_pix * oracle_bce(y[i], p[i] - h_step, cfg.clamp_eps);
      const double fd = (up - dn) / (2.0 * h_step) / k;
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-10});
      ASSERT_LE(std::abs(fd - grad[i]) / denom, 1e-4);
    }
  }
}

}  // namespace
