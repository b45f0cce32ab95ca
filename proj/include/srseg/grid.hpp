#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "srseg/common.hpp"

namespace srseg {

/// Dense H x W grid of doubles, row-major. The workhorse for probability
/// maps, level sets, distance fields, and weight maps.
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h, int w, double fill = 0.0)
      : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}

  double& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const {
    return height == o.height && width == o.width;
  }

  double sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  double mean() const { return v.empty() ? 0.0 : sum() / static_cast<double>(v.size()); }
  double min_value() const { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); }
  double max_value() const { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
};

/// Binary mask, values strictly {0,1}.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> v;

  BinaryMask() = default;
  BinaryMask(int h, int w, uint8_t fill = 0)
      : height(h), width(w), v(static_cast<size_t>(h) * w, fill ? 1 : 0) {}

  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }

  size_t size() const { return v.size(); }
  size_t foreground_count() const {
    size_t n = 0;
    for (uint8_t b : v) n += b;
    return n;
  }
  bool empty_foreground() const { return foreground_count() == 0; }
  bool full_foreground() const { return foreground_count() == size(); }

  BinaryMask inverted() const {
    BinaryMask out(height, width);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = v[i] ? 0 : 1;
    return out;
  }

  Grid to_grid() const {
    Grid g(height, width);
    for (size_t i = 0; i < v.size(); ++i) g.v[i] = v[i];
    return g;
  }
};

using ProbabilityMap = Grid;  // values in [0,1]
using LevelSetMap = Grid;     // signed distances, <=0 on foreground

/// Multi-channel image with values in [0,1], stored as planes.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<Grid> planes;

  Image() = default;
  Image(int h, int w, int channels, double fill = 0.0) : height(h), width(w) {
    planes.assign(static_cast<size_t>(channels), Grid(h, w, fill));
  }

  int channels() const { return static_cast<int>(planes.size()); }
  Grid& plane(int c) { return planes[static_cast<size_t>(c)]; }
  const Grid& plane(int c) const { return planes[static_cast<size_t>(c)]; }

  void clamp01() {
    for (Grid& p : planes)
      for (double& x : p.v) x = std::clamp(x, 0.0, 1.0);
  }
};

/// Blur kernel: kKernelSize x kKernelSize, non-negative, sums to 1.
inline constexpr int kKernelSize = 21;
inline constexpr int kKernelArea = kKernelSize * kKernelSize;

struct BlurKernel {
  std::array<double, kKernelArea> v{};

  double& at(int y, int x) { return v[static_cast<size_t>(y) * kKernelSize + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * kKernelSize + x]; }

  double sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }

  void normalize() {
    const double s = sum();
    if (s <= 0.0) throw ParameterError("blur kernel has non-positive mass");
    for (double& x : v) x /= s;
  }

  /// Centered delta (identity under convolution).
  static BlurKernel delta() {
    BlurKernel k;
    k.at(kKernelSize / 2, kKernelSize / 2) = 1.0;
    return k;
  }
};

/// Exact rational scale factor, e.g. {1,4} for x1/4 downsampling.
struct Fraction {
  int num = 1;
  int den = 1;

  double value() const { return static_cast<double>(num) / den; }
  bool scales_exactly(int extent) const {
    return (static_cast<long long>(extent) * num) % den == 0;
  }
  int apply(int extent) const {
    return static_cast<int>((static_cast<long long>(extent) * num) / den);
  }
};

}  // namespace srseg
