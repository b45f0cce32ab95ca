#include "srseg/degradation.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace srseg {
namespace {

TEST(SampleSpec, DeterministicGivenSeed) {
  const DegradationSpec a = sample_spec(1234);
  const DegradationSpec b = sample_spec(1234);
  EXPECT_EQ(a.sigma_a, b.sigma_a);
  EXPECT_EQ(a.sigma_b, b.sigma_b);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(SampleSpec, VarianceRangeAndMean) {
  double lo = 1e9, hi = -1e9, sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const DegradationSpec s = sample_spec(derive_seed(99, static_cast<uint64_t>(i)));
    for (const double v : {s.sigma_a * s.sigma_a, s.sigma_b * s.sigma_b}) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    EXPECT_GE(s.theta, 0.0);
    EXPECT_LT(s.theta, kPi);
  }
  EXPECT_GE(lo, 0.2);
  EXPECT_LE(hi, 4.0);
  // Uniform over [0.2, 4.0] has mean 2.1.
  EXPECT_NEAR(sum / (2.0 * n), 2.1, 0.05);
}

TEST(Degrade, PaperSizesQuarterScale) {
  Image hr(448, 448, 1, 0.6);
  auto [lr, kernel] = degrade(hr, sample_spec(5));
  EXPECT_EQ(lr.height, 112);
  EXPECT_EQ(lr.width, 112);
  EXPECT_NEAR(kernel.sum(), 1.0, 1e-9);
}

TEST(Degrade, ConstantImageStaysConstant) {
  Image hr(64, 64, 1, 0.35);
  auto [lr, kernel] = degrade(hr, sample_spec(6));
  for (double v : lr.plane(0).v) EXPECT_NEAR(v, 0.35, 1e-9);
}

TEST(Degrade, NearDeltaKernelApproximatesPlainBicubic) {
  Rng rng(77);
  Image hr(64, 64, 1);
  // Smooth image so that a sigma^2 = 0.2 blur barely moves values.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      hr.plane(0).at(y, x) = 0.5 + 0.3 * std::sin(0.2 * x) * std::cos(0.15 * y);
  DegradationSpec spec;
  spec.sigma_a = std::sqrt(0.2);
  spec.sigma_b = std::sqrt(0.2);
  spec.theta = 0.0;
  auto [lr, kernel] = degrade(hr, spec);
  const Image plain = bicubic_resize(hr, {1, 4});
  for (size_t i = 0; i < lr.plane(0).size(); ++i)
    EXPECT_NEAR(lr.plane(0).v[i], plain.plane(0).v[i], 0.02);
}

TEST(Degrade, ReturnedKernelMatchesSpecKernelExactly) {
  const DegradationSpec spec = sample_spec(321);
  Image hr(32, 32, 1, 0.5);
  auto [lr, kernel] = degrade(hr, spec);
  const BlurKernel direct = gaussian_kernel(spec.sigma_a, spec.sigma_b, spec.theta);
  for (int i = 0; i < kKernelArea; ++i)
    EXPECT_EQ(kernel.v[static_cast<size_t>(i)], direct.v[static_cast<size_t>(i)]);
}

TEST(Degrade, RejectsIndivisibleDimensions) {
  Image hr(30, 30, 1, 0.5);
  EXPECT_THROW(degrade(hr, sample_spec(1)), ParameterError);
}

TEST(Augment, DeterministicAndAligned) {
  Rng rng(9);
  Image hr(48, 48, 1);
  for (double& v : hr.plane(0).v) v = rng.uniform();
  BinaryMask mask = testing::random_mask(48, 48, rng, 0.2);

  auto [img1, m1] = augment(hr, mask, 32, 77);
  auto [img2, m2] = augment(hr, mask, 32, 77);
  EXPECT_EQ(img1.plane(0).v, img2.plane(0).v);
  EXPECT_EQ(m1.v, m2.v);

  // The same spatial map is applied to image and mask: every foreground pixel
  // of the output mask must carry the source pixel value at the source
  // position of the transform. Verify via a mask-marked image.
  Image marked = hr;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask.v[i]) marked.plane(0).v[i] = 1.0;
  auto [img3, m3] = augment(marked, mask, 32, 123);
  for (size_t i = 0; i < m3.size(); ++i)
    if (m3.v[i]) EXPECT_DOUBLE_EQ(img3.plane(0).v[i], 1.0);
}

TEST(Augment, FullPatchFlipsPreserveForegroundCount) {
  Rng rng(10);
  Image hr(32, 32, 1, 0.5);
  const BinaryMask mask = testing::random_mask(32, 32, rng, 0.25);
  for (uint64_t seed = 0; seed < 8; ++seed) {
    auto [img, m] = augment(hr, mask, 32, seed);
    EXPECT_EQ(m.foreground_count(), mask.foreground_count());
  }
}

TEST(Augment, RejectsOversizedPatch) {
  Image hr(32, 32, 1, 0.5);
  BinaryMask mask(32, 32);
  EXPECT_THROW(augment(hr, mask, 33, 0), ParameterError);
}

TEST(DegradationSpec, RejectsUnknownScale) {
  DegradationSpec spec = sample_spec(1);
  spec.scale = {1, 3};
  EXPECT_THROW(spec.validate(), ParameterError);
  spec.scale = {2, 4};
  EXPECT_THROW(spec.validate(), ParameterError);
}

}  // namespace
}  // namespace srseg
