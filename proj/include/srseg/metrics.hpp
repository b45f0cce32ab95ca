#pragma once

// Evaluation metrics: threshold-swept IoU and 95% Hausdorff distance, PSNR,
// SSIM, and kernel PSNR. Sweeps compute the mean over images per threshold,
// then reduce over thresholds (max/mean for IoU, min/mean for HD95).

#include <algorithm>
#include <cmath>
#include <vector>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/imaging.hpp"

namespace srseg {

/// Default binarization grid: 0.01 ... 0.99, step 0.01.
inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  t.reserve(99);
  for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
  return t;
}

inline BinaryMask binarize(const ProbabilityMap& p, double threshold) {
  BinaryMask m(p.height, p.width);
  for (size_t i = 0; i < p.size(); ++i) m.v[i] = p.v[i] >= threshold ? 1 : 0;
  return m;
}

/// Intersection over union. Both masks empty counts as a perfect match (1).
inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ParameterError("iou: shape mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    inter += pred.v[i] & gt.v[i];
    uni += pred.v[i] | gt.v[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Nearest-rank 95th percentile of a set of values.
inline double percentile95(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  const size_t rank = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(n)));
  return values[rank == 0 ? 0 : rank - 1];
}

// Directed 95th-percentile distance from the foreground of `from` to the
// foreground of `to`, computed via the exact distance transform.
inline double directed_hd95(const BinaryMask& from, const BinaryMask& to) {
  const Grid d2 = squared_distance(to);
  std::vector<double> dists;
  dists.reserve(from.foreground_count());
  for (size_t i = 0; i < from.size(); ++i)
    if (from.v[i]) dists.push_back(std::sqrt(d2.v[i]));
  return percentile95(dists);
}

}  // namespace detail

/// 95% Hausdorff distance: max of the two directed 95th-percentile
/// distances. Both masks empty -> 0; exactly one empty -> image diagonal.
inline double hd95(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ParameterError("hd95: shape mismatch");
  const bool pe = pred.empty_foreground(), ge = gt.empty_foreground();
  if (pe && ge) return 0.0;
  if (pe || ge)
    return std::sqrt(static_cast<double>(pred.height) * pred.height +
                     static_cast<double>(pred.width) * pred.width);
  return std::max(detail::directed_hd95(pred, gt), detail::directed_hd95(gt, pred));
}

struct ThresholdSweep {
  std::vector<double> thresholds;
  std::vector<double> values;  // mean over images at each threshold
};

struct SweepSummary {
  double best = 0.0;          // IoU_max or HD95_min
  double average = 0.0;       // AIU or AHD95
  double best_threshold = 0.0;
  ThresholdSweep sweep;
};

/// Mean IoU over images per threshold; best = max, average = mean.
inline SweepSummary iou_sweep(const std::vector<ProbabilityMap>& preds,
                              const std::vector<BinaryMask>& gts,
                              const std::vector<double>& thresholds = default_thresholds()) {
  if (preds.empty() || preds.size() != gts.size())
    throw ParameterError("iou_sweep: need matching non-empty prediction/gt sets");
  SweepSummary s;
  s.sweep.thresholds = thresholds;
  s.sweep.values.resize(thresholds.size());
  for (size_t t = 0; t < thresholds.size(); ++t) {
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i)
      acc += iou(binarize(preds[i], thresholds[t]), gts[i]);
    s.sweep.values[t] = acc / static_cast<double>(preds.size());
  }
  size_t best = 0;
  double sum = 0.0;
  for (size_t t = 0; t < thresholds.size(); ++t) {
    sum += s.sweep.values[t];
    if (s.sweep.values[t] > s.sweep.values[best]) best = t;
  }
  s.best = s.sweep.values[best];
  s.best_threshold = thresholds[best];
  s.average = sum / static_cast<double>(thresholds.size());
  return s;
}

/// Mean HD95 over images per threshold; best = min, average = mean.
inline SweepSummary hd95_sweep(const std::vector<ProbabilityMap>& preds,
                               const std::vector<BinaryMask>& gts,
                               const std::vector<double>& thresholds = default_thresholds()) {
  if (preds.empty() || preds.size() != gts.size())
    throw ParameterError("hd95_sweep: need matching non-empty prediction/gt sets");
  SweepSummary s;
  s.sweep.thresholds = thresholds;
  s.sweep.values.resize(thresholds.size());
  for (size_t t = 0; t < thresholds.size(); ++t) {
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i)
      acc += hd95(binarize(preds[i], thresholds[t]), gts[i]);
    s.sweep.values[t] = acc / static_cast<double>(preds.size());
  }
  size_t best = 0;
  double sum = 0.0;
  for (size_t t = 0; t < thresholds.size(); ++t) {
    sum += s.sweep.values[t];
    if (s.sweep.values[t] < s.sweep.values[best]) best = t;
  }
  s.best = s.sweep.values[best];
  s.best_threshold = thresholds[best];
  s.average = sum / static_cast<double>(thresholds.size());
  return s;
}

inline constexpr double kPsnrCap = 100.0;

inline double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

/// PSNR between two [0,1] images (peak 1). Identical inputs cap at 100 dB.
inline double psnr(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels() != b.channels())
    throw ParameterError("psnr: shape mismatch");
  double mse = 0.0;
  size_t n = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (size_t i = 0; i < a.plane(c).size(); ++i) {
      const double d = a.plane(c).v[i] - b.plane(c).v[i];
      mse += d * d;
      ++n;
    }
  return psnr_from_mse(mse / static_cast<double>(n), 1.0);
}

/// PSNR between kernels, peak = max of the ground-truth kernel.
inline double kernel_psnr(const BlurKernel& pred, const BlurKernel& gt) {
  double mse = 0.0, peak = 0.0;
  for (int i = 0; i < kKernelArea; ++i) {
    const double d = pred.v[static_cast<size_t>(i)] - gt.v[static_cast<size_t>(i)];
    mse += d * d;
    peak = std::max(peak, gt.v[static_cast<size_t>(i)]);
  }
  if (peak <= 0.0) throw ParameterError("kernel_psnr: ground-truth kernel is empty");
  return psnr_from_mse(mse / kKernelArea, peak);
}

namespace detail {

inline std::vector<double> gaussian_window11(double sigma = 1.5) {
  std::vector<double> w(11);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

// Separable 11x11 Gaussian filter with reflect padding.
inline Grid ssim_filter(const Grid& g) {
  static const std::vector<double> w = gaussian_window11();
  Grid tmp(g.height, g.width), out(g.height, g.width);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      double acc = 0.0;
      for (int k = -5; k <= 5; ++k)
        acc += w[static_cast<size_t>(k + 5)] * g.at(y, reflect_index(x + k, g.width));
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      double acc = 0.0;
      for (int k = -5; k <= 5; ++k)
        acc += w[static_cast<size_t>(k + 5)] * tmp.at(reflect_index(y + k, g.height), x);
      out.at(y, x) = acc;
    }
  return out;
}

inline double ssim_plane(const Grid& a, const Grid& b) {
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const Grid mu_a = ssim_filter(a);
  const Grid mu_b = ssim_filter(b);
  Grid aa(a.height, a.width), bb(a.height, a.width), ab(a.height, a.width);
  for (size_t i = 0; i < a.size(); ++i) {
    aa.v[i] = a.v[i] * a.v[i];
    bb.v[i] = b.v[i] * b.v[i];
    ab.v[i] = a.v[i] * b.v[i];
  }
  const Grid s_aa = ssim_filter(aa);
  const Grid s_bb = ssim_filter(bb);
  const Grid s_ab = ssim_filter(ab);
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = s_aa.v[i] - ma * ma;
    const double vb = s_bb.v[i] - mb * mb;
    const double cov = s_ab.v[i] - ma * mb;
    acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
           ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace detail

/// Mean SSIM (11x11 Gaussian window, standard constants, peak 1), averaged
/// over channels.
inline double ssim(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels() != b.channels())
    throw ParameterError("ssim: shape mismatch");
  double acc = 0.0;
  for (int c = 0; c < a.channels(); ++c) acc += detail::ssim_plane(a.plane(c), b.plane(c));
  return acc / a.channels();
}

}  // namespace srseg
