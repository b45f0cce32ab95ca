#pragma once

// Differentiable loss zoo for joint SR + crack segmentation: Boundary, Dice,
// Generalized Dice, weighted cross entropy, the Boundary Combo mixture, the
// L1 SR loss with kernel supervision, and the joint convex combination.
//
// Probability inputs are treated as free variables in [0,1]; the softmax
// constraint lives upstream in the networks. Every operation returns its
// scalar value together with the analytic gradient with respect to the
// predictions, which the test suite checks against central finite
// differences.
//
// Sign conventions: Dice and GDice are implemented as 1 - coefficient, and
// the weighted cross entropy carries a leading minus sign with per-pixel mean
// normalization, so that all of them are minimized (value 0) at a perfect
// prediction.

#include <array>
#include <cmath>
#include <string>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"

namespace srseg {

/// Two-class maps: index 0 = background, index 1 = crack.
using TwoClass = std::array<Grid, 2>;

inline TwoClass one_hot(const BinaryMask& mask) {
  TwoClass out{Grid(mask.height, mask.width), Grid(mask.height, mask.width)};
  for (size_t i = 0; i < mask.size(); ++i) {
    out[1].v[i] = mask.v[i];
    out[0].v[i] = 1.0 - out[1].v[i];
  }
  return out;
}

enum class SegLossKind { kBc, kGbc, kWce, kDice, kCombo, kBoundaryGdice };

inline SegLossKind parse_seg_loss(const std::string& name) {
  if (name == "bc") return SegLossKind::kBc;
  if (name == "gbc") return SegLossKind::kGbc;
  if (name == "wce") return SegLossKind::kWce;
  if (name == "dice") return SegLossKind::kDice;
  if (name == "combo") return SegLossKind::kCombo;
  if (name == "boundary+gdice") return SegLossKind::kBoundaryGdice;
  throw ConfigError("unknown segmentation loss: " + name);
}

inline std::string seg_loss_name(SegLossKind kind) {
  switch (kind) {
    case SegLossKind::kBc: return "bc";
    case SegLossKind::kGbc: return "gbc";
    case SegLossKind::kWce: return "wce";
    case SegLossKind::kDice: return "dice";
    case SegLossKind::kCombo: return "combo";
    case SegLossKind::kBoundaryGdice: return "boundary+gdice";
  }
  return "bc";
}

struct LossConfig {
  double alpha = 0.5;                         // boundary weight in BC
  double gamma = 0.5;                         // WCE-vs-Dice weight in the Combo part
  SegLossKind seg_loss = SegLossKind::kBc;
  std::array<double, 2> wce_class_weights{1.0, 1.0};
  double gdice_eps = 1e-7;
  double wce_clamp_eps = 1e-7;
  double kernel_loss_weight = 1.0;            // lambda_K

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("LossConfig: alpha outside [0,1]");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("LossConfig: gamma outside [0,1]");
    if (wce_class_weights[0] <= 0.0 || wce_class_weights[1] <= 0.0)
      throw ConfigError("LossConfig: class weights must be positive");
    if (gdice_eps <= 0.0 || wce_clamp_eps <= 0.0)
      throw ConfigError("LossConfig: eps must be positive");
    if (kernel_loss_weight < 0.0) throw ConfigError("LossConfig: kernel_loss_weight < 0");
  }
};

struct ScalarGrad1 {
  double value = 0.0;
  Grid grad;  // d value / d pred (crack channel)
};

struct ScalarGrad2 {
  double value = 0.0;
  TwoClass grad;  // d value / d pred, per class
};

/// Boundary loss: mean over pixels of levelset * predicted crack probability.
/// Negative inside correctly covered cracks, positive on false positives.
inline ScalarGrad1 boundary_loss(const Grid& pred_fg, const LevelSetMap& levelset) {
  if (!pred_fg.same_shape(levelset)) throw ParameterError("boundary_loss: shape mismatch");
  const double n = static_cast<double>(pred_fg.size());
  ScalarGrad1 out;
  out.grad = Grid(pred_fg.height, pred_fg.width);
  double acc = 0.0;
  for (size_t i = 0; i < pred_fg.size(); ++i) {
    acc += levelset.v[i] * pred_fg.v[i];
    out.grad.v[i] = levelset.v[i] / n;
  }
  out.value = acc / n;
  return out;
}

inline void check_two_class(const TwoClass& pred, const TwoClass& gt) {
  if (!pred[0].same_shape(pred[1]) || !gt[0].same_shape(gt[1]) || !pred[0].same_shape(gt[0]))
    throw ParameterError("two-class loss: shape mismatch");
}

/// Dice loss: 1 - 2*sum(p*g) / sum(p^2 + g^2) over both classes.
inline ScalarGrad2 dice_loss(const TwoClass& pred, const TwoClass& gt) {
  check_two_class(pred, gt);
  double a = 0.0, b = 0.0;
  for (int j = 0; j < 2; ++j)
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double p = pred[j].v[i], g = gt[j].v[i];
      a += p * g;
      b += p * p + g * g;
    }
  ScalarGrad2 out;
  out.value = 1.0 - 2.0 * a / b;
  const double b2 = b * b;
  for (int j = 0; j < 2; ++j) {
    out.grad[j] = Grid(pred[j].height, pred[j].width);
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double p = pred[j].v[i], g = gt[j].v[i];
      out.grad[j].v[i] = -2.0 * (g * b - 2.0 * a * p) / b2;
    }
  }
  return out;
}

/// Generalized Dice loss with per-class weights 1 / (|class gt| + eps).
inline ScalarGrad2 gdice_loss(const TwoClass& pred, const TwoClass& gt, double eps = 1e-7) {
  check_two_class(pred, gt);
  std::array<double, 2> w{};
  for (int j = 0; j < 2; ++j) w[j] = 1.0 / (gt[j].sum() + eps);
  double a = 0.0, b = 0.0;
  for (int j = 0; j < 2; ++j)
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double p = pred[j].v[i], g = gt[j].v[i];
      a += w[j] * p * g;
      b += w[j] * (p + g);
    }
  ScalarGrad2 out;
  out.value = 1.0 - 2.0 * a / b;
  const double b2 = b * b;
  for (int j = 0; j < 2; ++j) {
    out.grad[j] = Grid(pred[j].height, pred[j].width);
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double g = gt[j].v[i];
      out.grad[j].v[i] = -2.0 * w[j] * (g * b - a) / b2;
    }
  }
  return out;
}

/// Weighted cross entropy, mean-normalized over pixels. Probabilities are
/// clamped to [eps, 1-eps]; the gradient vanishes in the clamped region.
inline ScalarGrad2 wce_loss(const TwoClass& pred, const TwoClass& gt,
                            const std::array<double, 2>& class_weights, double eps = 1e-7) {
  check_two_class(pred, gt);
  const double n = static_cast<double>(pred[0].size());
  ScalarGrad2 out;
  double acc = 0.0;
  for (int j = 0; j < 2; ++j) {
    out.grad[j] = Grid(pred[j].height, pred[j].width);
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double p = std::clamp(pred[j].v[i], eps, 1.0 - eps);
      const double g = gt[j].v[i];
      acc += class_weights[j] * g * std::log(p);
      const bool interior = pred[j].v[i] > eps && pred[j].v[i] < 1.0 - eps;
      out.grad[j].v[i] = interior ? -class_weights[j] * g / (n * p) : 0.0;
    }
  }
  out.value = -acc / n;
  return out;
}

/// Result of a composite segmentation loss, with component values kept for
/// logging and recomposition checks.
struct SegLossResult {
  double value = 0.0;
  TwoClass grad;
  double boundary = 0.0;
  double region = 0.0;  // Dice or GDice, depending on the preset
  double wce = 0.0;
};

namespace detail {

// Pixel-weighted Boundary term: mean of w_p * phi_p * s_p.
inline ScalarGrad1 weighted_boundary(const Grid& pred_fg, const LevelSetMap& phi,
                                     const Grid* w) {
  if (!w) return boundary_loss(pred_fg, phi);
  if (!w->same_shape(pred_fg)) throw ParameterError("boundary weights: shape mismatch");
  const double n = static_cast<double>(pred_fg.size());
  ScalarGrad1 out;
  out.grad = Grid(pred_fg.height, pred_fg.width);
  double acc = 0.0;
  for (size_t i = 0; i < pred_fg.size(); ++i) {
    acc += w->v[i] * phi.v[i] * pred_fg.v[i];
    out.grad.v[i] = w->v[i] * phi.v[i] / n;
  }
  out.value = acc / n;
  return out;
}

// Pixel-weighted WCE: mean of w_p * per-pixel cross entropy.
inline ScalarGrad2 weighted_wce(const TwoClass& pred, const TwoClass& gt,
                                const std::array<double, 2>& cw, double eps, const Grid* w) {
  if (!w) return wce_loss(pred, gt, cw, eps);
  if (!w->same_shape(pred[0])) throw ParameterError("wce weights: shape mismatch");
  const double n = static_cast<double>(pred[0].size());
  ScalarGrad2 out;
  double acc = 0.0;
  for (int j = 0; j < 2; ++j) {
    out.grad[j] = Grid(pred[j].height, pred[j].width);
    for (size_t i = 0; i < pred[j].size(); ++i) {
      const double p = std::clamp(pred[j].v[i], eps, 1.0 - eps);
      const double g = gt[j].v[i];
      acc += w->v[i] * cw[j] * g * std::log(p);
      const bool interior = pred[j].v[i] > eps && pred[j].v[i] < 1.0 - eps;
      out.grad[j].v[i] = interior ? -w->v[i] * cw[j] * g / (n * p) : 0.0;
    }
  }
  out.value = -acc / n;
  return out;
}

inline void axpy(TwoClass& acc, const TwoClass& x, double k) {
  for (int j = 0; j < 2; ++j)
    for (size_t i = 0; i < x[j].size(); ++i) acc[j].v[i] += k * x[j].v[i];
}

}  // namespace detail

/// Composite segmentation loss per the configured preset. For BC:
///   alpha * L_B + (1 - alpha) * ((1 - gamma) * L_D + gamma * L_WCE),
/// GBC substitutes GDice for Dice. `pixel_weights`, when given, scales the
/// pixelwise Boundary and WCE terms (the region term stays global); it is
/// treated as a constant during differentiation.
inline SegLossResult seg_loss(const TwoClass& pred, const TwoClass& gt,
                              const LevelSetMap& levelset, const LossConfig& cfg,
                              const Grid* pixel_weights = nullptr) {
  cfg.validate();
  check_two_class(pred, gt);
  SegLossResult out;
  out.grad = TwoClass{Grid(pred[0].height, pred[0].width), Grid(pred[1].height, pred[1].width)};

  const auto add_boundary = [&](double coeff) {
    const ScalarGrad1 b = detail::weighted_boundary(pred[1], levelset, pixel_weights);
    out.boundary = b.value;
    out.value += coeff * b.value;
    for (size_t i = 0; i < b.grad.size(); ++i) out.grad[1].v[i] += coeff * b.grad.v[i];
  };
  const auto add_dice = [&](double coeff, bool generalized) {
    const ScalarGrad2 d =
        generalized ? gdice_loss(pred, gt, cfg.gdice_eps) : dice_loss(pred, gt);
    out.region = d.value;
    out.value += coeff * d.value;
    detail::axpy(out.grad, d.grad, coeff);
  };
  const auto add_wce = [&](double coeff) {
    const ScalarGrad2 w = detail::weighted_wce(pred, gt, cfg.wce_class_weights,
                                               cfg.wce_clamp_eps, pixel_weights);
    out.wce = w.value;
    out.value += coeff * w.value;
    detail::axpy(out.grad, w.grad, coeff);
  };

  switch (cfg.seg_loss) {
    case SegLossKind::kBc:
      add_boundary(cfg.alpha);
      add_dice((1.0 - cfg.alpha) * (1.0 - cfg.gamma), false);
      add_wce((1.0 - cfg.alpha) * cfg.gamma);
      break;
    case SegLossKind::kGbc:
      add_boundary(cfg.alpha);
      add_dice((1.0 - cfg.alpha) * (1.0 - cfg.gamma), true);
      add_wce((1.0 - cfg.alpha) * cfg.gamma);
      break;
    case SegLossKind::kWce:
      add_wce(1.0);
      break;
    case SegLossKind::kDice:
      add_dice(1.0, false);
      break;
    case SegLossKind::kCombo:
      add_dice(1.0 - cfg.gamma, false);
      add_wce(cfg.gamma);
      break;
    case SegLossKind::kBoundaryGdice:
      add_boundary(cfg.alpha);
      add_dice(1.0 - cfg.alpha, true);
      break;
  }
  return out;
}

inline SegLossResult bc_loss(const TwoClass& pred, const TwoClass& gt,
                             const LevelSetMap& levelset, const LossConfig& cfg,
                             const Grid* pixel_weights = nullptr) {
  LossConfig c = cfg;
  c.seg_loss = cfg.seg_loss == SegLossKind::kGbc ? SegLossKind::kGbc : SegLossKind::kBc;
  return seg_loss(pred, gt, levelset, c, pixel_weights);
}

/// SR loss: mean absolute image error plus lambda_K times the mean absolute
/// kernel error. `weight_map`, when given, scales the per-pixel image term
/// and is treated as a constant during differentiation.
struct SrLossResult {
  double value = 0.0;
  double image_term = 0.0;   // weighted mean absolute pixel error
  double kernel_term = 0.0;  // mean absolute kernel error (unweighted)
  Image grad_sr;
  BlurKernel grad_kernel;    // gradient, not a distribution
  Grid pixel_map;            // per-pixel mean-abs error, for SR-loss weighting
};

inline SrLossResult sr_loss(const Image& sr, const Image& hr, const BlurKernel& pred_kernel,
                            const BlurKernel& gt_kernel, double lambda_k = 1.0,
                            const Grid* weight_map = nullptr) {
  if (sr.height != hr.height || sr.width != hr.width || sr.channels() != hr.channels())
    throw ParameterError("sr_loss: image shape mismatch");
  if (weight_map && (weight_map->height != sr.height || weight_map->width != sr.width))
    throw ParameterError("sr_loss: weight map shape mismatch");

  const double n = static_cast<double>(sr.height) * sr.width;
  const double nc = n * sr.channels();

  SrLossResult out;
  out.grad_sr = Image(sr.height, sr.width, sr.channels());
  out.pixel_map = Grid(sr.height, sr.width);

  double image_acc = 0.0;
  for (int c = 0; c < sr.channels(); ++c) {
    for (size_t i = 0; i < sr.plane(c).size(); ++i) {
      const double d = sr.plane(c).v[i] - hr.plane(c).v[i];
      const double w = weight_map ? weight_map->v[i] : 1.0;
      out.pixel_map.v[i] += std::abs(d) / sr.channels();
      image_acc += w * std::abs(d);
      out.grad_sr.plane(c).v[i] = w * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / nc;
    }
  }
  out.image_term = image_acc / nc;

  double kernel_acc = 0.0;
  for (int i = 0; i < kKernelArea; ++i) {
    const double d = pred_kernel.v[static_cast<size_t>(i)] - gt_kernel.v[static_cast<size_t>(i)];
    kernel_acc += std::abs(d);
    out.grad_kernel.v[static_cast<size_t>(i)] =
        lambda_k * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / kKernelArea;
  }
  out.kernel_term = kernel_acc / kKernelArea;

  out.value = out.image_term + lambda_k * out.kernel_term;
  return out;
}

/// L_J = (1 - beta) * L_S + beta * L_C.
inline double joint_loss(double l_s, double l_c, double beta) {
  if (beta < 0.0 || beta > 1.0) throw ParameterError("joint_loss: beta outside [0,1]");
  return (1.0 - beta) * l_s + beta * l_c;
}

}  // namespace srseg
