#pragma once

// Layer primitives with explicit forward/backward. Each layer caches what it
// needs from the forward pass; backward accumulates parameter gradients and
// returns the input gradient. Batch items are independent, so the conv loops
// parallelize over the batch with bitwise-deterministic results.

#include <cmath>
#include <utility>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/nn/tensor.hpp"

namespace srseg::nn {

namespace detail {

inline void im2col(const float* x, int c, int h, int w, int k, int stride, int pad,
                   int oh, int ow, float* col) {
  // col layout: (c*k*k) x (oh*ow)
  const int cols = oh * ow;
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<size_t>(ic) * k * k + ky * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          const bool y_ok = iy >= 0 && iy < h;
          const float* src = x + (static_cast<size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            row[oy * ow + ox] = (y_ok && ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

inline void col2im(const float* col, int c, int h, int w, int k, int stride, int pad,
                   int oh, int ow, float* x) {
  const int cols = oh * ow;
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<size_t>(ic) * k * k + ky * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          float* dst = x + (static_cast<size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

class Conv2d {
 public:
  Conv2d(std::string name, int in_c, int out_c, int k, int stride = 1, int pad = -1)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride),
        pad_(pad >= 0 ? pad : k / 2) {
    weight_.name = name + ".weight";
    bias_.name = name + ".bias";
    weight_.resize(static_cast<size_t>(out_c) * in_c * k * k);
    bias_.resize(static_cast<size_t>(out_c));
  }

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (float& x : weight_.value) x = static_cast<float>(std * rng.normal());
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
  }

  // Identity-style init used by the SFT branches: zero weights, constant bias.
  void init_constant(float bias_fill) {
    std::fill(weight_.value.begin(), weight_.value.end(), 0.0f);
    std::fill(bias_.value.begin(), bias_.value.end(), bias_fill);
  }

  Tensor forward(const Tensor& x) {
    x_ = x;
    const int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
    Tensor y(x.n, out_c_, oh, ow);
    const int rows = in_c_ * k_ * k_;
    const int cols = oh * ow;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
      std::vector<float> col(static_cast<size_t>(rows) * cols);
      detail::im2col(x.item(i), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
      ConstMapRM wmat(weight_.value.data(), out_c_, rows);
      ConstMapRM cmat(col.data(), rows, cols);
      MapRM ymat(y.item(i), out_c_, cols);
      ymat.noalias() = wmat * cmat;
      for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value[static_cast<size_t>(oc)];
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    const Tensor& x = x_;
    const int oh = dy.h, ow = dy.w;
    const int rows = in_c_ * k_ * k_;
    const int cols = oh * ow;
    Tensor dx(x.n, in_c_, x.h, x.w);

    // Per-item weight/bias gradients, reduced in fixed order afterwards.
    std::vector<std::vector<float>> dw_items(static_cast<size_t>(x.n));
    std::vector<std::vector<float>> db_items(static_cast<size_t>(x.n));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
      std::vector<float> col(static_cast<size_t>(rows) * cols);
      detail::im2col(x.item(i), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
      ConstMapRM dymat(dy.item(i), out_c_, cols);
      ConstMapRM cmat(col.data(), rows, cols);

      auto& dw = dw_items[static_cast<size_t>(i)];
      dw.assign(weight_.value.size(), 0.0f);
      MapRM dwmat(dw.data(), out_c_, rows);
      dwmat.noalias() = dymat * cmat.transpose();

      auto& db = db_items[static_cast<size_t>(i)];
      db.assign(bias_.value.size(), 0.0f);
      for (int oc = 0; oc < out_c_; ++oc) db[static_cast<size_t>(oc)] = dymat.row(oc).sum();

      std::vector<float> dcol(static_cast<size_t>(rows) * cols);
      MapRM dcmat(dcol.data(), rows, cols);
      ConstMapRM wmat(weight_.value.data(), out_c_, rows);
      dcmat.noalias() = wmat.transpose() * dymat;
      detail::col2im(dcol.data(), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, dx.item(i));
    }
    for (int i = 0; i < x.n; ++i) {
      for (size_t j = 0; j < weight_.grad.size(); ++j)
        weight_.grad[j] += dw_items[static_cast<size_t>(i)][j];
      for (size_t j = 0; j < bias_.grad.size(); ++j)
        bias_.grad[j] += db_items[static_cast<size_t>(i)][j];
    }
    return dx;
  }

  ParamTensor weight_, bias_;

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Tensor x_;
};

class Linear {
 public:
  Linear(std::string name, int in_f, int out_f) : in_f_(in_f), out_f_(out_f) {
    weight_.name = name + ".weight";
    bias_.name = name + ".bias";
    weight_.resize(static_cast<size_t>(out_f) * in_f);
    bias_.resize(static_cast<size_t>(out_f));
  }

  void init_he(Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_f_));
    for (float& x : weight_.value) x = static_cast<float>(std * rng.normal());
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
  }

  // x: (n, in_f, 1, 1) -> (n, out_f, 1, 1)
  Tensor forward(const Tensor& x) {
    x_ = x;
    Tensor y(x.n, out_f_, 1, 1);
    ConstMapRM wmat(weight_.value.data(), out_f_, in_f_);
    for (int i = 0; i < x.n; ++i) {
      Eigen::Map<const Eigen::VectorXf> xv(x.item(i), in_f_);
      Eigen::Map<Eigen::VectorXf> yv(y.item(i), out_f_);
      yv.noalias() = wmat * xv;
      for (int o = 0; o < out_f_; ++o) yv[o] += bias_.value[static_cast<size_t>(o)];
    }
    return y;
  }

  Tensor backward(const Tensor& dy) {
    Tensor dx(x_.n, in_f_, 1, 1);
    ConstMapRM wmat(weight_.value.data(), out_f_, in_f_);
    MapRM dwmat(weight_.grad.data(), out_f_, in_f_);
    for (int i = 0; i < x_.n; ++i) {
      Eigen::Map<const Eigen::VectorXf> dyv(dy.item(i), out_f_);
      Eigen::Map<const Eigen::VectorXf> xv(x_.item(i), in_f_);
      dwmat.noalias() += dyv * xv.transpose();
      for (int o = 0; o < out_f_; ++o) bias_.grad[static_cast<size_t>(o)] += dyv[o];
      Eigen::Map<Eigen::VectorXf> dxv(dx.item(i), in_f_);
      dxv.noalias() = wmat.transpose() * dyv;
    }
    return dx;
  }

  ParamTensor weight_, bias_;

 private:
  int in_f_, out_f_;
  Tensor x_;
};

// Leaky rectifier. The nonzero negative slope keeps a gradient path through
// every unit, which the end-to-end differentiability contract relies on.
class LeakyReLU {
 public:
  explicit LeakyReLU(float negative_slope = 0.1f) : slope_(negative_slope) {}

  Tensor forward(const Tensor& x) {
    mask_ = x;
    Tensor y = x;
    for (float& v : y.v) v = v > 0.0f ? v : slope_ * v;
    return y;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i)
      if (mask_.v[i] <= 0.0f) dx.v[i] *= slope_;
    return dx;
  }

 private:
  float slope_;
  Tensor mask_;  // pre-activation input
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x) {
    y_ = x;
    for (float& v : y_.v) v = 1.0f / (1.0f + std::exp(-v));
    return y_;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y_.v[i] * (1.0f - y_.v[i]);
    return dx;
  }

 private:
  Tensor y_;
};

class NearestUpsample2x {
 public:
  Tensor forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy)
          for (int xx = 0; xx < y.w; ++xx)
            y.at(i, c, yy, xx) = x.at(i, c, yy / 2, xx / 2);
    return y;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, in_h_, in_w_);
    for (int i = 0; i < dy.n; ++i)
      for (int c = 0; c < dy.c; ++c)
        for (int yy = 0; yy < dy.h; ++yy)
          for (int xx = 0; xx < dy.w; ++xx)
            dx.at(i, c, yy / 2, xx / 2) += dy.at(i, c, yy, xx);
    return dx;
  }

 private:
  int in_h_ = 0, in_w_ = 0;
};

/// Per-pixel softmax across channels (used for the 2-class head and, with
/// h=w=1, for the 441-way kernel head).
class ChannelSoftmax {
 public:
  Tensor forward(const Tensor& x) {
    y_ = Tensor(x.n, x.c, x.h, x.w);
    for (int i = 0; i < x.n; ++i)
      for (int yy = 0; yy < x.h; ++yy)
        for (int xx = 0; xx < x.w; ++xx) {
          float mx = x.at(i, 0, yy, xx);
          for (int c = 1; c < x.c; ++c) mx = std::max(mx, x.at(i, c, yy, xx));
          float sum = 0.0f;
          for (int c = 0; c < x.c; ++c) {
            const float e = std::exp(x.at(i, c, yy, xx) - mx);
            y_.at(i, c, yy, xx) = e;
            sum += e;
          }
          for (int c = 0; c < x.c; ++c) y_.at(i, c, yy, xx) /= sum;
        }
    return y_;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    for (int i = 0; i < dy.n; ++i)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) {
          float dot = 0.0f;
          for (int c = 0; c < dy.c; ++c) dot += dy.at(i, c, yy, xx) * y_.at(i, c, yy, xx);
          for (int c = 0; c < dy.c; ++c)
            dx.at(i, c, yy, xx) = y_.at(i, c, yy, xx) * (dy.at(i, c, yy, xx) - dot);
        }
    return dx;
  }

 private:
  Tensor y_;
};

class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const float inv = 1.0f / static_cast<float>(x.h * x.w);
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c) {
        float acc = 0.0f;
        for (int yy = 0; yy < x.h; ++yy)
          for (int xx = 0; xx < x.w; ++xx) acc += x.at(i, c, yy, xx);
        y.at(i, c, 0, 0) = acc * inv;
      }
    return y;
  }
  Tensor backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, in_h_, in_w_);
    const float inv = 1.0f / static_cast<float>(in_h_ * in_w_);
    for (int i = 0; i < dy.n; ++i)
      for (int c = 0; c < dy.c; ++c) {
        const float g = dy.at(i, c, 0, 0) * inv;
        for (int yy = 0; yy < in_h_; ++yy)
          for (int xx = 0; xx < in_w_; ++xx) dx.at(i, c, yy, xx) = g;
      }
    return dx;
  }

 private:
  int in_h_ = 0, in_w_ = 0;
};

// Functional helpers (no state; shapes recorded by the caller).

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ParameterError("concat_channels: shape mismatch");
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i)
    for (int c = 0; c < y.c; ++c)
      for (int yy = 0; yy < a.h; ++yy)
        for (int xx = 0; xx < a.w; ++xx)
          y.at(i, c, yy, xx) = c < a.c ? a.at(i, c, yy, xx) : b.at(i, c - a.c, yy, xx);
  return y;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& dy, int c_first) {
  Tensor da(dy.n, c_first, dy.h, dy.w);
  Tensor db(dy.n, dy.c - c_first, dy.h, dy.w);
  for (int i = 0; i < dy.n; ++i)
    for (int c = 0; c < dy.c; ++c)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) {
          if (c < c_first)
            da.at(i, c, yy, xx) = dy.at(i, c, yy, xx);
          else
            db.at(i, c - c_first, yy, xx) = dy.at(i, c, yy, xx);
        }
  return {std::move(da), std::move(db)};
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ParameterError("add: shape mismatch");
  Tensor y = a;
  for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += b.v[i];
  return y;
}

}  // namespace srseg::nn
