#include "srseg/weighting.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace srseg {
namespace {

using testing::random_grid;
using testing::random_nondegenerate_mask;
using testing::random_two_class;

// ---------------------------------------------------------------------------
// CO weight
// ---------------------------------------------------------------------------

TEST(CoWeight, CrackPixelsGetWeightOne) {
  Rng rng(1);
  const BinaryMask gt = random_nondegenerate_mask(12, 12, rng);
  const Grid w = co_weight_map(gt, 4.0);
  for (size_t i = 0; i < gt.size(); ++i)
    if (gt.v[i]) EXPECT_DOUBLE_EQ(w.v[i], 1.0);
}

TEST(CoWeight, AnalyticValueAtUnitDistance) {
  BinaryMask gt(3, 3);
  gt.at(1, 1) = 1;
  const Grid w = co_weight_map(gt, 8.0);
  EXPECT_NEAR(w.at(1, 0), std::exp(-8.0), 1e-12);  // D = 1
}

TEST(CoWeight, EmptyGroundTruthGivesAllOnes) {
  const Grid w = co_weight_map(BinaryMask(6, 6), 8.0);
  for (double v : w.v) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(CoWeight, DecaysWithBruteForceDistance) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask gt = random_nondegenerate_mask(10, 10, rng, 0.1);
    const double m = rng.uniform(0.125, 8.0);
    const Grid w = co_weight_map(gt, m);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        double best = 1e18;
        for (int fy = 0; fy < 10; ++fy)
          for (int fx = 0; fx < 10; ++fx)
            if (gt.at(fy, fx))
              best = std::min(best, std::sqrt(static_cast<double>((y - fy) * (y - fy) +
                                                                  (x - fx) * (x - fx))));
        EXPECT_NEAR(w.at(y, x), std::exp(-m * best), 1e-9);
      }
  }
}

// ---------------------------------------------------------------------------
// FO weight
// ---------------------------------------------------------------------------

TEST(FoWeight, CorrectPixelGetsOne) {
  BinaryMask gt(2, 2);
  gt.at(0, 0) = 1;
  Grid pred(2, 2, 0.0);
  pred.at(0, 0) = 1.0;
  const Grid w = fo_weight_map(pred, gt, 3.0);
  for (double v : w.v) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(FoWeight, TotalFailureGetsE) {
  BinaryMask gt(1, 1);
  gt.at(0, 0) = 1;
  Grid pred(1, 1, 0.0);
  const Grid w = fo_weight_map(pred, gt, 1.0);
  EXPECT_NEAR(w.at(0, 0), std::exp(1.0), 1e-12);
}

TEST(FoWeight, ZeroExponentGivesAllOnes) {
  Rng rng(3);
  const BinaryMask gt = random_nondegenerate_mask(8, 8, rng);
  const Grid pred = random_grid(8, 8, rng);
  const Grid w = fo_weight_map(pred, gt, 0.0);
  for (double v : w.v) EXPECT_DOUBLE_EQ(v, 1.0);
}

// ---------------------------------------------------------------------------
// Segmentation-loss weight map
// ---------------------------------------------------------------------------

TEST(SegLossMap, PerfectPredictionGivesAllOnes) {
  Rng rng(4);
  const BinaryMask g = random_nondegenerate_mask(8, 8, rng);
  const TwoClass gt = one_hot(g);
  const LevelSetMap phi = level_set(g);
  LossConfig cfg;
  const Grid w = seg_loss_map(gt, gt, phi, cfg);
  for (double v : w.v) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(SegLossMap, UnitMeanAlways) {
  Rng rng(5);
  LossConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask g = random_nondegenerate_mask(8, 8, rng);
    const TwoClass gt = one_hot(g);
    const TwoClass pred = random_two_class(8, 8, rng);
    const Grid w = seg_loss_map(pred, gt, level_set(g), cfg);
    EXPECT_NEAR(w.mean(), 1.0, 1e-9);
    for (double v : w.v) {
      EXPECT_GE(v, 0.0);
      EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(SegLossMap, WrongPixelsOutweighCorrectPixels) {
  // Half-wrong prediction: left half perfect, right half inverted.
  BinaryMask g(8, 8);
  for (int y = 0; y < 8; ++y) g.at(y, 3) = 1;
  const TwoClass gt = one_hot(g);
  TwoClass pred = gt;
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x) {
      pred[1].at(y, x) = 1.0 - gt[1].at(y, x);
      pred[0].at(y, x) = 1.0 - gt[0].at(y, x);
    }
  LossConfig cfg;
  const Grid w = seg_loss_map(pred, gt, level_set(g), cfg);
  double wrong_min = 1e18, correct_max = -1e18;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 4; ++x) correct_max = std::max(correct_max, w.at(y, x));
    for (int x = 4; x < 8; ++x) wrong_min = std::min(wrong_min, w.at(y, x));
  }
  EXPECT_GT(wrong_min, correct_max);
}

// ---------------------------------------------------------------------------
// apply_weights
// ---------------------------------------------------------------------------

TEST(ApplyWeights, EmptySequenceIsUnweightedMean) {
  Rng rng(6);
  const Grid loss = random_grid(8, 8, rng);
  EXPECT_DOUBLE_EQ(apply_weights(loss, {}), loss.mean());
}

TEST(ApplyWeights, ConstantTwoDoubles) {
  Rng rng(7);
  const Grid loss = random_grid(8, 8, rng);
  const Grid two(8, 8, 2.0);
  EXPECT_NEAR(apply_weights(loss, {two}), 2.0 * loss.mean(), 1e-12);
}

TEST(ApplyWeights, MatchesNaiveLoopOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 2 + static_cast<int>(rng.uniform_int(15));
    const int w = 2 + static_cast<int>(rng.uniform_int(15));
    const Grid loss = random_grid(h, w, rng);
    std::vector<Grid> maps;
    const int n_maps = static_cast<int>(rng.uniform_int(4));
    for (int m = 0; m < n_maps; ++m) maps.push_back(random_grid(h, w, rng, 0.1, 3.0));

    double expect = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = loss.at(y, x);
        for (const Grid& m : maps) v *= m.at(y, x);
        expect += v;
      }
    expect /= static_cast<double>(h * w);
    EXPECT_NEAR(apply_weights(loss, maps), expect, 1e-9);
  }
}

TEST(ApplyWeights, RejectsShapeMismatch) {
  EXPECT_THROW(apply_weights(Grid(4, 4), {Grid(4, 5)}), ParameterError);
}

TEST(ProductMap, EmptyListIsAllOnes) {
  const Grid p = product_map(4, 4, {});
  for (double v : p.v) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(WeightMaps, AlwaysStrictlyPositiveAndFinite) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask gt = random_nondegenerate_mask(8, 8, rng);
    const Grid pred = random_grid(8, 8, rng);
    for (const Grid& w :
         {co_weight_map(gt, 8.0), fo_weight_map(pred, gt, 8.0)}) {
      for (double v : w.v) {
        EXPECT_GT(v, 0.0);
        EXPECT_TRUE(std::isfinite(v));
      }
    }
  }
}

}  // namespace
}  // namespace srseg
