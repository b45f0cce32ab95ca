#include "srseg/imaging.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace srseg {
namespace {

using testing::random_grid;
using testing::random_mask;
using testing::random_nondegenerate_mask;

// ---------------------------------------------------------------------------
// gaussian_kernel
// ---------------------------------------------------------------------------

TEST(GaussianKernel, IsotropicIgnoresRotation) {
  const BlurKernel a = gaussian_kernel(1.0, 1.0, 0.0);
  const BlurKernel b = gaussian_kernel(1.0, 1.0, kPi / 3.0);
  for (int i = 0; i < kKernelArea; ++i)
    EXPECT_NEAR(a.v[static_cast<size_t>(i)], b.v[static_cast<size_t>(i)], 1e-12);
}

TEST(GaussianKernel, NormalizedToUnitSum) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const double sa = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
    const double sb = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
    const BlurKernel k = gaussian_kernel(sa, sb, rng.uniform(0.0, kPi));
    EXPECT_NEAR(k.sum(), 1.0, 1e-9);
    for (double v : k.v) EXPECT_GE(v, 0.0);
  }
}

TEST(GaussianKernel, AxisSwapSymmetry) {
  const BlurKernel a = gaussian_kernel(2.0, 0.5, kPi / 2.0);
  const BlurKernel b = gaussian_kernel(0.5, 2.0, 0.0);
  for (int i = 0; i < kKernelArea; ++i)
    EXPECT_NEAR(a.v[static_cast<size_t>(i)], b.v[static_cast<size_t>(i)], 1e-12);
}

TEST(GaussianKernel, AxisSwapSymmetryRandomized) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const double sa = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
    const double sb = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
    const double theta = rng.uniform(0.0, kPi / 2.0);  // keep theta + pi/2 in range
    const BlurKernel a = gaussian_kernel(sa, sb, theta);
    const BlurKernel b = gaussian_kernel(sb, sa, theta + kPi / 2.0 - 1e-15);
    for (int i = 0; i < kKernelArea; ++i)
      EXPECT_NEAR(a.v[static_cast<size_t>(i)], b.v[static_cast<size_t>(i)], 1e-9);
  }
}

TEST(GaussianKernel, RejectsOutOfRangeParameters) {
  EXPECT_THROW(gaussian_kernel(0.1, 1.0, 0.0), ParameterError);   // sigma^2 = 0.01
  EXPECT_THROW(gaussian_kernel(2.5, 1.0, 0.0), ParameterError);   // sigma^2 = 6.25
  EXPECT_THROW(gaussian_kernel(1.0, 1.0, -0.1), ParameterError);
  EXPECT_THROW(gaussian_kernel(1.0, 1.0, kPi), ParameterError);
}

// ---------------------------------------------------------------------------
// convolve
// ---------------------------------------------------------------------------

Image random_image(int h, int w, int channels, Rng& rng) {
  Image img(h, w, channels);
  for (int c = 0; c < channels; ++c) img.plane(c) = random_grid(h, w, rng, 0.0, 1.0);
  return img;
}

TEST(Convolve, DeltaKernelIsIdentity) {
  Rng rng(3);
  const Image img = random_image(40, 33, 1, rng);
  const Image out = convolve(img, BlurKernel::delta());
  for (size_t i = 0; i < img.plane(0).size(); ++i)
    EXPECT_NEAR(out.plane(0).v[i], img.plane(0).v[i], 1e-12);
}

TEST(Convolve, ConstantImageStaysConstant) {
  Image img(30, 30, 1, 0.42);
  const Image out = convolve(img, gaussian_kernel(1.5, 0.8, 0.7));
  for (double v : out.plane(0).v) EXPECT_NEAR(v, 0.42, 1e-12);
}

// Direct O(N k^2) nested-loop reference with the same reflect border.
Grid convolve_reference(const Grid& in, const BlurKernel& k) {
  const int half = kKernelSize / 2;
  Grid out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int ky = -half; ky <= half; ++ky)
        for (int kx = -half; kx <= half; ++kx) {
          int sy = y - ky, sx = x - kx;
          while (sy < 0 || sy >= in.height) sy = sy < 0 ? -sy - 1 : 2 * in.height - sy - 1;
          while (sx < 0 || sx >= in.width) sx = sx < 0 ? -sx - 1 : 2 * in.width - sx - 1;
          acc += k.at(ky + half, kx + half) * in.at(sy, sx);
        }
      out.at(y, x) = acc;
    }
  return out;
}

TEST(Convolve, MatchesNaiveReference) {
  Rng rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const Image img = random_image(16, 16, 1, rng);
    const BlurKernel k = gaussian_kernel(std::sqrt(rng.uniform(0.2, 4.0)),
                                         std::sqrt(rng.uniform(0.2, 4.0)),
                                         rng.uniform(0.0, kPi));
    const Image out = convolve(img, k);
    const Grid ref = convolve_reference(img.plane(0), k);
    for (size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.plane(0).v[i], ref.v[i], 1e-12);
  }
}

TEST(Convolve, PreservesMeanWithConstantBorderBand) {
  Rng rng(4);
  Image img(64, 64, 1, 0.5);
  // Interior random, outer 10-px band constant: reflection then re-weights
  // only constant pixels, so the global mean is preserved.
  for (int y = 10; y < 54; ++y)
    for (int x = 10; x < 54; ++x) img.plane(0).at(y, x) = rng.uniform();
  const double before = img.plane(0).mean();
  const Image out = convolve(img, gaussian_kernel(1.2, 1.9, 1.1));
  EXPECT_NEAR(out.plane(0).mean(), before, 1e-6);
}

// ---------------------------------------------------------------------------
// bicubic_resize
// ---------------------------------------------------------------------------

TEST(BicubicResize, QuarterScaleShape) {
  Image img(448, 448, 1, 0.3);
  const Image out = bicubic_resize(img, {1, 4});
  EXPECT_EQ(out.height, 112);
  EXPECT_EQ(out.width, 112);
}

TEST(BicubicResize, ConstantImageStaysConstant) {
  Image img(64, 48, 3, 0.77);
  const Image out = bicubic_resize(img, {1, 4});
  for (int c = 0; c < 3; ++c)
    for (double v : out.plane(c).v) EXPECT_NEAR(v, 0.77, 1e-12);
}

TEST(BicubicResize, UnitScaleIsIdentity) {
  Rng rng(5);
  const Image img = random_image(24, 24, 1, rng);
  const Image out = bicubic_resize(img, {1, 1});
  for (size_t i = 0; i < img.plane(0).size(); ++i)
    EXPECT_NEAR(out.plane(0).v[i], img.plane(0).v[i], 1e-12);
}

TEST(BicubicResize, RejectsNonIntegralOutput) {
  Image img(30, 30, 1, 0.5);
  EXPECT_THROW(bicubic_resize(img, {1, 4}), ParameterError);
}

// ---------------------------------------------------------------------------
// distance_transform / level_set
// ---------------------------------------------------------------------------

Grid distance_reference(const BinaryMask& mask) {
  Grid d(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      double best = 1e18;
      for (int fy = 0; fy < mask.height; ++fy)
        for (int fx = 0; fx < mask.width; ++fx)
          if (mask.at(fy, fx)) {
            const double d2 = static_cast<double>((y - fy) * (y - fy) + (x - fx) * (x - fx));
            best = std::min(best, d2);
          }
      d.at(y, x) = std::sqrt(best);
    }
  return d;
}

TEST(DistanceTransform, AnalyticCorner) {
  BinaryMask m(3, 3);
  m.at(0, 0) = 1;
  const Grid d = distance_transform(m);
  EXPECT_DOUBLE_EQ(d.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.at(2, 2), 2.0 * std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(d.at(0, 2), 2.0);
}

TEST(DistanceTransform, ZeroExactlyOnForeground) {
  Rng rng(23);
  const BinaryMask m = random_nondegenerate_mask(12, 14, rng);
  const Grid d = distance_transform(m);
  for (size_t i = 0; i < m.size(); ++i) {
    if (m.v[i])
      EXPECT_DOUBLE_EQ(d.v[i], 0.0);
    else
      EXPECT_GT(d.v[i], 0.0);
  }
}

TEST(DistanceTransform, MatchesBruteForceOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask m = random_nondegenerate_mask(16, 16, rng, rng.uniform(0.05, 0.6));
    const Grid got = distance_transform(m);
    const Grid want = distance_reference(m);
    for (size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(got.v[i], want.v[i], 1e-9);
  }
}

TEST(DistanceTransform, EmptyMaskIsAnError) {
  BinaryMask m(4, 4);
  EXPECT_THROW(distance_transform(m), EmptyRegionError);
}

TEST(LevelSet, FullAndEmptyMasksGiveZeroMap) {
  BinaryMask full(5, 5, 1);
  BinaryMask empty(5, 5, 0);
  for (double v : level_set(full).v) EXPECT_DOUBLE_EQ(v, 0.0);
  for (double v : level_set(empty).v) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(LevelSet, TwoByTwoAnalytic) {
  BinaryMask m(2, 2);
  m.at(0, 0) = 1;
  m.at(1, 0) = 1;
  const LevelSetMap phi = level_set(m);
  EXPECT_DOUBLE_EQ(phi.at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(phi.at(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(phi.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(phi.at(1, 1), 1.0);
}

TEST(LevelSet, InvertedMaskNegatesTheMap) {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask m = random_nondegenerate_mask(16, 16, rng);
    const LevelSetMap a = level_set(m);
    const LevelSetMap b = level_set(m.inverted());
    for (size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.v[i], -b.v[i]);
  }
}

TEST(LevelSet, SignsAndMagnitudesMatchBruteForce) {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask m = random_nondegenerate_mask(16, 16, rng);
    const LevelSetMap phi = level_set(m);
    const Grid d_fg = distance_reference(m);
    const Grid d_bg = distance_reference(m.inverted());
    for (size_t i = 0; i < m.size(); ++i) {
      if (m.v[i]) {
        EXPECT_LE(phi.v[i], 0.0);
        EXPECT_NEAR(phi.v[i], -d_bg.v[i], 1e-9);
      } else {
        EXPECT_GE(phi.v[i], 0.0);
        EXPECT_NEAR(phi.v[i], d_fg.v[i], 1e-9);
      }
    }
  }
}

}  // namespace
}  // namespace srseg
