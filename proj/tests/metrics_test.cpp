#include "srseg/metrics.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace srseg {
namespace {

using testing::random_grid;
using testing::random_mask;

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

TEST(Iou, IdenticalMasksGiveOne) {
  Rng rng(1);
  const BinaryMask m = random_mask(8, 8, rng);
  EXPECT_DOUBLE_EQ(iou(m, m), 1.0);
}

TEST(Iou, DisjointMasksGiveZero) {
  BinaryMask a(4, 4), b(4, 4);
  a.at(0, 0) = 1;
  b.at(3, 3) = 1;
  EXPECT_DOUBLE_EQ(iou(a, b), 0.0);
}

TEST(Iou, PartialOverlapOneThird) {
  BinaryMask pred(1, 3), gt(1, 3);
  pred.at(0, 0) = pred.at(0, 1) = 1;  // {a, b}
  gt.at(0, 1) = gt.at(0, 2) = 1;      // {b, c}
  EXPECT_NEAR(iou(pred, gt), 1.0 / 3.0, 1e-15);
}

TEST(Iou, BothEmptyCountsAsPerfect) {
  EXPECT_DOUBLE_EQ(iou(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
}

TEST(Iou, SymmetricInArguments) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask a = random_mask(8, 8, rng);
    const BinaryMask b = random_mask(8, 8, rng);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
  }
}

TEST(Iou, NestedMasksAreMonotone) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask gt = random_mask(8, 8, rng, 0.5);
    // A subset of B subset of gt.
    BinaryMask b = gt;
    BinaryMask a = gt;
    for (size_t i = 0; i < gt.size(); ++i) {
      if (b.v[i] && rng.uniform() < 0.3) b.v[i] = 0;
      a.v[i] = b.v[i] && rng.uniform() >= 0.3 ? 1 : 0;
    }
    EXPECT_GE(iou(b, gt), iou(a, gt));
  }
}

// ---------------------------------------------------------------------------
// IoU sweep
// ---------------------------------------------------------------------------

TEST(IouSweep, BinaryPredictionsAreThresholdIndependent) {
  Rng rng(4);
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
  for (int i = 0; i < 3; ++i) {
    const BinaryMask m = random_mask(8, 8, rng);
    preds.push_back(m.to_grid());
    gts.push_back(random_mask(8, 8, rng));
  }
  const SweepSummary s = iou_sweep(preds, gts);
  for (double v : s.sweep.values) EXPECT_DOUBLE_EQ(v, s.sweep.values[0]);
  EXPECT_NEAR(s.best, s.average, 1e-12);  // mean of identical values, fp-summed
}

TEST(IouSweep, MatchesBruteForceDoubleLoop) {
  Rng rng(5);
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
  for (int i = 0; i < 5; ++i) {
    preds.push_back(random_grid(8, 8, rng, 0.0, 1.0));
    gts.push_back(random_mask(8, 8, rng));
  }
  const SweepSummary s = iou_sweep(preds, gts);
  const auto thresholds = default_thresholds();
  double best = -1.0, sum = 0.0;
  for (size_t t = 0; t < thresholds.size(); ++t) {
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
      BinaryMask bin(8, 8);
      for (size_t p = 0; p < bin.size(); ++p)
        bin.v[p] = preds[i].v[p] >= thresholds[t] ? 1 : 0;
      acc += iou(bin, gts[i]);
    }
    acc /= static_cast<double>(preds.size());
    EXPECT_NEAR(s.sweep.values[t], acc, 1e-15);
    best = std::max(best, acc);
    sum += acc;
  }
  EXPECT_NEAR(s.best, best, 1e-15);
  EXPECT_NEAR(s.average, sum / static_cast<double>(thresholds.size()), 1e-12);
  EXPECT_GE(s.best, s.average);
}

// ---------------------------------------------------------------------------
// HD95
// ---------------------------------------------------------------------------

double hd95_reference(const BinaryMask& a, const BinaryMask& b) {
  std::vector<std::pair<int, int>> pa, pb;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (a.at(y, x)) pa.push_back({y, x});
      if (b.at(y, x)) pb.push_back({y, x});
    }
  const auto directed = [](const auto& from, const auto& to) {
    std::vector<double> d;
    for (const auto& [fy, fx] : from) {
      double best = 1e18;
      for (const auto& [ty, tx] : to)
        best = std::min(best, static_cast<double>((fy - ty) * (fy - ty) +
                                                  (fx - tx) * (fx - tx)));
      d.push_back(std::sqrt(best));
    }
    std::sort(d.begin(), d.end());
    const size_t rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
    return d[rank == 0 ? 0 : rank - 1];
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

TEST(Hd95, IdenticalMasksGiveZero) {
  Rng rng(6);
  const BinaryMask m = testing::random_nondegenerate_mask(8, 8, rng);
  EXPECT_DOUBLE_EQ(hd95(m, m), 0.0);
}

TEST(Hd95, SinglePointsGiveTheirDistance) {
  BinaryMask a(10, 10), b(10, 10);
  a.at(1, 2) = 1;
  b.at(5, 8) = 1;
  EXPECT_DOUBLE_EQ(hd95(a, b), std::sqrt(16.0 + 36.0));
}

TEST(Hd95, EmptySetPolicies) {
  BinaryMask empty(6, 8);
  BinaryMask some(6, 8);
  some.at(2, 2) = 1;
  EXPECT_DOUBLE_EQ(hd95(empty, empty), 0.0);
  EXPECT_DOUBLE_EQ(hd95(empty, some), std::sqrt(36.0 + 64.0));  // image diagonal
  EXPECT_DOUBLE_EQ(hd95(some, empty), std::sqrt(36.0 + 64.0));
}

TEST(Hd95, MatchesBruteForceOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    // Random point sets of up to 64 points each.
    BinaryMask a(16, 16), b(16, 16);
    const int na = 1 + static_cast<int>(rng.uniform_int(64));
    const int nb = 1 + static_cast<int>(rng.uniform_int(64));
    for (int i = 0; i < na; ++i)
      a.at(static_cast<int>(rng.uniform_int(16)), static_cast<int>(rng.uniform_int(16))) = 1;
    for (int i = 0; i < nb; ++i)
      b.at(static_cast<int>(rng.uniform_int(16)), static_cast<int>(rng.uniform_int(16))) = 1;
    EXPECT_NEAR(hd95(a, b), hd95_reference(a, b), 1e-9) << "trial " << trial;
  }
}

TEST(Hd95, SymmetricInArguments) {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const BinaryMask a = testing::random_nondegenerate_mask(12, 12, rng, 0.15);
    const BinaryMask b = testing::random_nondegenerate_mask(12, 12, rng, 0.15);
    EXPECT_DOUBLE_EQ(hd95(a, b), hd95(b, a));
  }
}

TEST(Hd95Sweep, PerfectPredictionsGiveZero) {
  Rng rng(9);
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
  for (int i = 0; i < 3; ++i) {
    const BinaryMask m = testing::random_nondegenerate_mask(8, 8, rng);
    preds.push_back(m.to_grid());
    gts.push_back(m);
  }
  const SweepSummary s = hd95_sweep(preds, gts);
  EXPECT_DOUBLE_EQ(s.best, 0.0);
  EXPECT_DOUBLE_EQ(s.average, 0.0);
  EXPECT_LE(s.best, s.average);
}

TEST(Hd95Sweep, MinNeverExceedsMean) {
  Rng rng(10);
  std::vector<ProbabilityMap> preds;
  std::vector<BinaryMask> gts;
  for (int i = 0; i < 4; ++i) {
    preds.push_back(random_grid(8, 8, rng, 0.0, 1.0));
    gts.push_back(random_mask(8, 8, rng));
  }
  const SweepSummary s = hd95_sweep(preds, gts);
  EXPECT_LE(s.best, s.average + 1e-12);
}

// ---------------------------------------------------------------------------
// PSNR / SSIM / kernel PSNR
// ---------------------------------------------------------------------------

TEST(Psnr, UniformTenthOffsetIsTwentyDb) {
  Image a(16, 16, 1, 0.5), b(16, 16, 1, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, IdenticalInputsCapAtHundred) {
  Image a(8, 8, 3, 0.3);
  EXPECT_DOUBLE_EQ(psnr(a, a), 100.0);
}

TEST(KernelPsnr, IdenticalKernelsCap) {
  const BlurKernel k = gaussian_kernel(1.0, 1.5, 0.4);
  EXPECT_DOUBLE_EQ(kernel_psnr(k, k), 100.0);
}

TEST(KernelPsnr, UsesGroundTruthPeak) {
  const BlurKernel gt = gaussian_kernel(0.5, 0.5, 0.0);
  BlurKernel pred = gt;
  for (double& v : pred.v) v += 1e-4;
  pred.normalize();
  const double v = kernel_psnr(pred, gt);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 100.0);
}

TEST(Ssim, SelfSimilarityIsOne) {
  Rng rng(11);
  Image a(32, 32, 1);
  a.plane(0) = random_grid(32, 32, rng, 0.0, 1.0);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, DegradedImageScoresBelowOne) {
  Rng rng(12);
  Image a(32, 32, 1);
  a.plane(0) = random_grid(32, 32, rng, 0.0, 1.0);
  Image b = a;
  for (double& v : b.plane(0).v) v = std::clamp(v + 0.2 * (rng.uniform() - 0.5), 0.0, 1.0);
  const double v = ssim(a, b);
  EXPECT_LT(v, 1.0);
  EXPECT_GT(v, 0.0);
}

}  // namespace
}  // namespace srseg
