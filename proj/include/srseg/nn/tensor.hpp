#pragma once

// Minimal NCHW float tensor for the desk-scale networks. Convolutions run as
// im2col + Eigen GEMM; everything is single-precision and deterministic.

#include <Eigen/Core>

#include <cstring>
#include <string>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"

namespace srseg::nn {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  size_t size() const { return v.size(); }
  size_t item_size() const { return static_cast<size_t>(c) * h * w; }

  float* item(int i) { return v.data() + static_cast<size_t>(i) * item_size(); }
  const float* item(int i) const { return v.data() + static_cast<size_t>(i) * item_size(); }

  float& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  float at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  void zero() { std::memset(v.data(), 0, v.size() * sizeof(float)); }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/// Named parameter block with its gradient accumulator.
struct ParamTensor {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  void resize(size_t n) {
    value.assign(n, 0.0f);
    grad.assign(n, 0.0f);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

// Conversions at the double-precision loss boundary.

inline Grid tensor_plane_to_grid(const Tensor& t, int item, int channel) {
  Grid g(t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) g.at(y, x) = t.at(item, channel, y, x);
  return g;
}

inline Image tensor_to_image(const Tensor& t, int item) {
  Image img(t.h, t.w, t.c);
  for (int c = 0; c < t.c; ++c) img.plane(c) = tensor_plane_to_grid(t, item, c);
  img.clamp01();
  return img;
}

inline void image_to_tensor_item(const Image& img, Tensor& t, int item) {
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at(item, c, y, x) = static_cast<float>(img.plane(c).at(y, x));
}

inline void grid_to_tensor_item(const Grid& g, Tensor& t, int item, int channel) {
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      t.at(item, channel, y, x) = static_cast<float>(g.at(y, x));
}

}  // namespace srseg::nn
