#pragma once

// Segmentation-aware pixelwise weighting of the SR loss: the crack-oriented
// weight exp(-m_C * D_p), the fail-oriented weight exp(m_F * |T^P - T^GT|),
// and the weight map derived from the pixelwise segmentation loss. All maps
// are treated as constants during backpropagation; they steer the SR loss,
// they are not loss terms themselves.

#include <cmath>
#include <string>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/imaging.hpp"
#include "srseg/losses.hpp"

namespace srseg {

struct WeightConfig {
  bool use_lc_weight = false;
  bool use_co_weight = false;
  bool use_fo_weight = false;
  double m_c = 8.0;
  double m_f = 1.0;
  std::string fo_target = "sr_loss";  // "sr_loss" | "seg_loss"

  void validate() const {
    if (m_c < 0.0 || m_f < 0.0) throw ConfigError("WeightConfig: m_C/m_F must be >= 0");
    if (fo_target != "sr_loss" && fo_target != "seg_loss")
      throw ConfigError("WeightConfig: fo_target must be sr_loss or seg_loss");
  }
};

/// Crack-oriented weight: w_p = exp(-m_C * D_p) with D_p the distance to the
/// nearest crack pixel. All ones when the ground truth has no crack.
inline Grid co_weight_map(const BinaryMask& gt, double m_c) {
  if (gt.empty_foreground()) return Grid(gt.height, gt.width, 1.0);
  Grid d = distance_transform(gt);
  for (double& x : d.v) x = std::exp(-m_c * x);
  return d;
}

/// Fail-oriented weight: w_p = exp(m_F * |T^P_p - T^GT_p|).
inline Grid fo_weight_map(const ProbabilityMap& pred_fg, const BinaryMask& gt, double m_f) {
  if (pred_fg.height != gt.height || pred_fg.width != gt.width)
    throw ParameterError("fo_weight_map: shape mismatch");
  Grid w(gt.height, gt.width);
  for (size_t i = 0; i < w.size(); ++i)
    w.v[i] = std::exp(m_f * std::abs(pred_fg.v[i] - static_cast<double>(gt.v[i])));
  return w;
}

/// Weight map derived from the pixelwise segmentation loss. Combines the
/// pixelwise boundary mismatch term phi_p * (s_p - g_p) and the pixelwise
/// WCE term with the global Dice value broadcast as a constant, then shifts
/// the map to be non-negative and scales it to unit mean. A constant raw map
/// (e.g. at perfect prediction) yields the all-ones map.
inline Grid seg_loss_map(const TwoClass& pred, const TwoClass& gt, const LevelSetMap& levelset,
                         const LossConfig& cfg) {
  cfg.validate();
  check_two_class(pred, gt);
  if (!levelset.same_shape(pred[0])) throw ParameterError("seg_loss_map: shape mismatch");

  const double dice_value = dice_loss(pred, gt).value;

  Grid raw(pred[0].height, pred[0].width);
  for (size_t i = 0; i < raw.size(); ++i) {
    // Boundary mismatch keeps the ground-truth term that the scalar loss
    // drops as a constant; it is >= 0 and zero at a perfect prediction.
    const double b = levelset.v[i] * (pred[1].v[i] - gt[1].v[i]);
    double ce = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double p = std::clamp(pred[j].v[i], cfg.wce_clamp_eps, 1.0 - cfg.wce_clamp_eps);
      ce -= cfg.wce_class_weights[static_cast<size_t>(j)] * gt[j].v[i] * std::log(p);
    }
    raw.v[i] = cfg.alpha * b +
               (1.0 - cfg.alpha) * (cfg.gamma * ce + (1.0 - cfg.gamma) * dice_value);
  }

  const double lo = raw.min_value();
  if (lo < 0.0)
    for (double& x : raw.v) x -= lo;
  const double mean = raw.mean();
  // A (numerically) constant map carries no pixel preference: all ones.
  const double range = raw.max_value() - raw.min_value();
  if (mean <= 1e-12 || range <= 1e-12 * std::max(1.0, mean))
    return Grid(raw.height, raw.width, 1.0);
  for (double& x : raw.v) x /= mean;
  return raw;
}

/// Mean over pixels of the SR pixel loss times the product of all weight
/// maps. With no maps this is exactly the unweighted mean pixel loss.
inline double apply_weights(const Grid& sr_pixel_loss, const std::vector<Grid>& maps) {
  for (const Grid& m : maps)
    if (!m.same_shape(sr_pixel_loss)) throw ParameterError("apply_weights: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < sr_pixel_loss.size(); ++i) {
    double w = 1.0;
    for (const Grid& m : maps) w *= m.v[i];
    acc += w * sr_pixel_loss.v[i];
  }
  return sr_pixel_loss.size() ? acc / static_cast<double>(sr_pixel_loss.size()) : 0.0;
}

/// Pointwise product of weight maps (all-ones for an empty list).
inline Grid product_map(int height, int width, const std::vector<Grid>& maps) {
  Grid out(height, width, 1.0);
  for (const Grid& m : maps) {
    if (m.height != height || m.width != width)
      throw ParameterError("product_map: shape mismatch");
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= m.v[i];
  }
  return out;
}

}  // namespace srseg
