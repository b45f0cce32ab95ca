#pragma once

// Deterministic image-grid primitives: anisotropic Gaussian kernel synthesis,
// reflect-padded convolution, Keys bicubic resampling, exact Euclidean
// distance transform, and signed level sets. Everything here is a pure
// function; all heavier modules build on these.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"

namespace srseg {

inline constexpr double kSigmaSqMin = 0.2;
inline constexpr double kSigmaSqMax = 4.0;

/// Rotated anisotropic 2D Gaussian, kKernelSize x kKernelSize, normalized to
/// sum 1. sigma_a / sigma_b are the standard deviations along the rotated
/// axes; theta is the rotation in radians.
inline BlurKernel gaussian_kernel(double sigma_a, double sigma_b, double theta) {
  const double va = sigma_a * sigma_a;
  const double vb = sigma_b * sigma_b;
  const double slack = 1e-9;
  if (!(va >= kSigmaSqMin - slack && va <= kSigmaSqMax + slack) ||
      !(vb >= kSigmaSqMin - slack && vb <= kSigmaSqMax + slack)) {
    throw ParameterError("gaussian_kernel: sigma^2 outside [0.2, 4.0]");
  }
  if (!(theta >= 0.0 && theta < kPi)) {
    throw ParameterError("gaussian_kernel: theta outside [0, pi)");
  }

  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const int half = kKernelSize / 2;

  BlurKernel k;
  for (int y = 0; y < kKernelSize; ++y) {
    for (int x = 0; x < kKernelSize; ++x) {
      const double dx = x - half;
      const double dy = y - half;
      // Coordinates in the rotated frame of the two principal axes.
      const double u = c * dx + s * dy;
      const double w = -s * dx + c * dy;
      k.at(y, x) = std::exp(-0.5 * (u * u / va + w * w / vb));
    }
  }
  k.normalize();
  return k;
}

namespace detail {

// Symmetric reflection (edge pixel duplicated): -1 -> 0, -2 -> 1, n -> n-1.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace detail

/// True 2D convolution (kernel flipped) with reflect padding. Output has the
/// input's size; values are clamped back to [0,1].
inline Grid convolve_plane(const Grid& in, const BlurKernel& kernel) {
  const int half = kKernelSize / 2;
  Grid out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < kKernelSize; ++ky) {
        const int sy = detail::reflect_index(y - (ky - half), in.height);
        for (int kx = 0; kx < kKernelSize; ++kx) {
          const int sx = detail::reflect_index(x - (kx - half), in.width);
          acc += kernel.at(ky, kx) * in.at(sy, sx);
        }
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

inline Image convolve(const Image& in, const BlurKernel& kernel) {
  if (in.channels() == 0 || in.height == 0 || in.width == 0)
    throw ParameterError("convolve: empty image");
  if (std::abs(kernel.sum() - 1.0) > 1e-6)
    throw ParameterError("convolve: kernel not normalized");
  Image out(in.height, in.width, in.channels());
  for (int c = 0; c < in.channels(); ++c) out.plane(c) = convolve_plane(in.plane(c), kernel);
  out.clamp01();
  return out;
}

namespace detail {

// Keys cubic weight, a = -0.5.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace detail

/// Keys bicubic (a = -0.5) resampling to an explicit output size, clamped
/// border. Centers are aligned via the usual half-pixel mapping.
inline Grid bicubic_resize_plane(const Grid& in, int out_h, int out_w) {
  Grid out(out_h, out_w);
  const double sy_scale = static_cast<double>(in.height) / out_h;
  const double sx_scale = static_cast<double>(in.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + 0.5) * sy_scale - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    double wy[4];
    for (int t = 0; t < 4; ++t) wy[t] = detail::cubic_weight(sy - (iy - 1 + t));
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + 0.5) * sx_scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      double acc = 0.0;
      for (int t = 0; t < 4; ++t) {
        const int yy = detail::clamp_index(iy - 1 + t, in.height);
        double row = 0.0;
        for (int u = 0; u < 4; ++u) {
          const int xx = detail::clamp_index(ix - 1 + u, in.width);
          row += detail::cubic_weight(sx - (ix - 1 + u)) * in.at(yy, xx);
        }
        acc += wy[t] * row;
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

inline Image bicubic_resize(const Image& in, Fraction scale) {
  if (scale.num <= 0 || scale.den <= 0)
    throw ParameterError("bicubic_resize: scale must be positive");
  if (!scale.scales_exactly(in.height) || !scale.scales_exactly(in.width))
    throw ParameterError("bicubic_resize: output dimensions not integral");
  const int oh = scale.apply(in.height);
  const int ow = scale.apply(in.width);
  Image out(oh, ow, in.channels());
  for (int c = 0; c < in.channels(); ++c)
    out.plane(c) = bicubic_resize_plane(in.plane(c), oh, ow);
  out.clamp01();
  return out;
}

namespace detail {

// 1D squared-distance transform (Felzenszwalb & Huttenlocher lower envelope).
inline void dt1d(const double* f, int n, double* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + q * static_cast<double>(q)) -
                (f[v[k]] + v[k] * static_cast<double>(v[k]))) /
               (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * static_cast<double>(q)) -
           (f[v[k]] + v[k] * static_cast<double>(v[k]))) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - static_cast<double>(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared Euclidean distance to the nearest foreground pixel.
inline Grid squared_distance(const BinaryMask& mask) {
  const int h = mask.height, w = mask.width;
  const double inf = 1e18;
  Grid d(h, w);
  for (size_t i = 0; i < mask.size(); ++i) d.v[i] = mask.v[i] ? 0.0 : inf;

  const int n = std::max(h, w);
  std::vector<double> f(n), out(n), z(n + 1);
  std::vector<int> v(n);

  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = d.at(y, x);
    dt1d(f.data(), h, out.data(), v.data(), z.data());
    for (int y = 0; y < h; ++y) d.at(y, x) = out[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = d.at(y, x);
    dt1d(f.data(), w, out.data(), v.data(), z.data());
    for (int x = 0; x < w; ++x) d.at(y, x) = out[x];
  }
  return d;
}

}  // namespace detail

/// Exact Euclidean distance from each pixel to the nearest foreground pixel.
inline Grid distance_transform(const BinaryMask& mask) {
  if (mask.size() == 0) throw ParameterError("distance_transform: empty mask grid");
  if (mask.empty_foreground())
    throw EmptyRegionError("distance_transform: mask has no foreground pixel");
  Grid d = detail::squared_distance(mask);
  for (double& x : d.v) x = std::sqrt(x);
  return d;
}

/// Signed level set of the mask region G: -d(q, complement of G) inside G,
/// +d(q, G) outside. All-zero when G is empty or full, which makes the
/// Boundary loss vanish on crack-free (or all-crack) patches.
inline LevelSetMap level_set(const BinaryMask& mask) {
  LevelSetMap phi(mask.height, mask.width, 0.0);
  if (mask.empty_foreground() || mask.full_foreground()) return phi;
  const Grid d_fg = distance_transform(mask);
  const Grid d_bg = distance_transform(mask.inverted());
  for (size_t i = 0; i < mask.size(); ++i)
    phi.v[i] = mask.v[i] ? -d_bg.v[i] : d_fg.v[i];
  return phi;
}

}  // namespace srseg
