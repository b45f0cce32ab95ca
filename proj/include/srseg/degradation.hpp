#pragma once

// Synthetic degradation: sample an anisotropic Gaussian blur, blur the HR
// patch, bicubically downsample. Plus the paired crop/flip augmentation used
// at training time. Masks are never degraded; ground truth stays at HR
// resolution.

#include <utility>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/imaging.hpp"

namespace srseg {

struct DegradationSpec {
  double sigma_a = 1.0;
  double sigma_b = 1.0;
  double theta = 0.0;
  Fraction scale{1, 4};
  uint64_t seed = 0;

  void validate() const {
    const double va = sigma_a * sigma_a, vb = sigma_b * sigma_b;
    const double slack = 1e-9;
    if (!(va >= kSigmaSqMin - slack && va <= kSigmaSqMax + slack) ||
        !(vb >= kSigmaSqMin - slack && vb <= kSigmaSqMax + slack))
      throw ParameterError("DegradationSpec: sigma^2 outside [0.2, 4.0]");
    if (!(theta >= 0.0 && theta < kPi))
      throw ParameterError("DegradationSpec: theta outside [0, pi)");
    const bool known = (scale.num == 1) &&
                       (scale.den == 2 || scale.den == 4 || scale.den == 8);
    if (!known) throw ParameterError("DegradationSpec: scale must be 1/2, 1/4 or 1/8");
  }

  BlurKernel kernel() const { return gaussian_kernel(sigma_a, sigma_b, theta); }
};

/// Uniformly samples sigma^2 over [0.2, 4.0] (uniform in variance, not in
/// sigma) and theta over [0, pi). Deterministic given the seed.
inline DegradationSpec sample_spec(uint64_t seed, Fraction scale = {1, 4}) {
  Rng rng(seed);
  DegradationSpec spec;
  spec.sigma_a = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
  spec.sigma_b = std::sqrt(rng.uniform(kSigmaSqMin, kSigmaSqMax));
  spec.theta = rng.uniform(0.0, kPi);
  spec.scale = scale;
  spec.seed = seed;
  return spec;
}

/// I^L = (I^H * K) downsampled by spec.scale. Returns the LR image and the
/// kernel used, for supervision.
inline std::pair<Image, BlurKernel> degrade(const Image& hr, const DegradationSpec& spec) {
  spec.validate();
  if (!spec.scale.scales_exactly(hr.height) || !spec.scale.scales_exactly(hr.width))
    throw ParameterError("degrade: HR dimensions not divisible by scale");
  BlurKernel kernel = spec.kernel();
  Image lr = bicubic_resize(convolve(hr, kernel), spec.scale);
  return {std::move(lr), kernel};
}

/// Random patch crop plus horizontal/vertical flips, applied identically to
/// the image and its mask. Deterministic given the seed.
inline std::pair<Image, BinaryMask> augment(const Image& hr, const BinaryMask& mask,
                                            int patch, uint64_t seed) {
  if (hr.height != mask.height || hr.width != mask.width)
    throw ParameterError("augment: image/mask dimensions differ");
  if (patch <= 0 || patch > hr.height || patch > hr.width)
    throw ParameterError("augment: patch larger than image");

  Rng rng(seed);
  const int y0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hr.height - patch + 1)));
  const int x0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hr.width - patch + 1)));
  const bool hflip = rng.uniform_int(2) != 0;
  const bool vflip = rng.uniform_int(2) != 0;

  Image img(patch, patch, hr.channels());
  BinaryMask m(patch, patch);
  for (int y = 0; y < patch; ++y) {
    const int sy = y0 + (vflip ? patch - 1 - y : y);
    for (int x = 0; x < patch; ++x) {
      const int sx = x0 + (hflip ? patch - 1 - x : x);
      for (int c = 0; c < hr.channels(); ++c) img.plane(c).at(y, x) = hr.plane(c).at(sy, sx);
      m.at(y, x) = mask.at(sy, sx);
    }
  }
  return {std::move(img), std::move(m)};
}

}  // namespace srseg
