#pragma once

// Metric reports: JSON + per-threshold CSV output, and the IoU/HD95-versus-
// threshold curve plots (SVG, or PNG via a small rasterizer). Every artifact
// embeds the config hash and seed.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/metrics.hpp"
#include "srseg/png_io.hpp"

namespace srseg {

struct PerImageMetrics {
  std::string id;
  double iou_at_best = 0.0;   // at the IoU_max threshold
  double hd95_at_best = 0.0;  // at the HD95_min threshold
  double psnr = 0.0;
  double ssim = 0.0;
  double kernel_psnr = 0.0;
};

struct MetricReport {
  double iou_max = 0.0;
  double aiu = 0.0;
  double iou_best_threshold = 0.0;
  double hd95_min = 0.0;
  double ahd95 = 0.0;
  double hd95_best_threshold = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double kernel_psnr = 0.0;
  ThresholdSweep iou_sweep;
  ThresholdSweep hd95_sweep;
  std::vector<PerImageMetrics> per_image;
  std::string config_hash;
  uint64_t seed = 0;

  void check_invariants() const {
    if (iou_max < aiu - 1e-12) throw StateError("MetricReport: IoU_max < AIU");
    if (hd95_min > ahd95 + 1e-12) throw StateError("MetricReport: HD95_min > AHD95");
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& p : per_image)
      per.push_back({{"id", p.id},
                     {"iou_at_best", p.iou_at_best},
                     {"hd95_at_best", p.hd95_at_best},
                     {"psnr", p.psnr},
                     {"ssim", p.ssim},
                     {"kernel_psnr", p.kernel_psnr}});
    return nlohmann::json{
        {"config_hash", config_hash},
        {"seed", seed},
        {"IoU_max", iou_max},
        {"AIU", aiu},
        {"IoU_best_threshold", iou_best_threshold},
        {"HD95_min", hd95_min},
        {"AHD95", ahd95},
        {"HD95_best_threshold", hd95_best_threshold},
        {"PSNR", psnr},
        {"SSIM", ssim},
        {"kernel_PSNR", kernel_psnr},
        {"iou_sweep", {{"thresholds", iou_sweep.thresholds}, {"values", iou_sweep.values}}},
        {"hd95_sweep", {{"thresholds", hd95_sweep.thresholds}, {"values", hd95_sweep.values}}},
        {"per_image", per}};
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    r.config_hash = j.value("config_hash", "");
    r.seed = j.value("seed", 0ull);
    r.iou_max = j.at("IoU_max").get<double>();
    r.aiu = j.at("AIU").get<double>();
    r.iou_best_threshold = j.at("IoU_best_threshold").get<double>();
    r.hd95_min = j.at("HD95_min").get<double>();
    r.ahd95 = j.at("AHD95").get<double>();
    r.hd95_best_threshold = j.at("HD95_best_threshold").get<double>();
    r.psnr = j.value("PSNR", 0.0);
    r.ssim = j.value("SSIM", 0.0);
    r.kernel_psnr = j.value("kernel_PSNR", 0.0);
    r.iou_sweep.thresholds = j.at("iou_sweep").at("thresholds").get<std::vector<double>>();
    r.iou_sweep.values = j.at("iou_sweep").at("values").get<std::vector<double>>();
    r.hd95_sweep.thresholds = j.at("hd95_sweep").at("thresholds").get<std::vector<double>>();
    r.hd95_sweep.values = j.at("hd95_sweep").at("values").get<std::vector<double>>();
    return r;
  }
};

inline void save_report(const MetricReport& r, const std::filesystem::path& path) {
  r.check_invariants();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path.string());
  out << r.to_json().dump(2) << "\n";
}

inline MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read report: " + path.string());
  nlohmann::json j;
  in >> j;
  return MetricReport::from_json(j);
}

/// Per-threshold CSV: threshold, mean IoU, mean HD95.
inline void save_sweep_csv(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write csv: " + path.string());
  out << "# config_hash=" << r.config_hash << " seed=" << r.seed << "\n";
  out << "threshold,iou,hd95\n";
  char buf[128];
  for (size_t i = 0; i < r.iou_sweep.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r.iou_sweep.thresholds[i],
                  r.iou_sweep.values[i], r.hd95_sweep.values[i]);
    out << buf;
  }
}

namespace detail {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

inline std::string svg_polyline(const PlotSeries& s, double x0, double y0, double pw, double ph,
                                double xmin, double xmax, double ymin, double ymax,
                                const std::string& color) {
  std::string pts;
  char buf[64];
  for (size_t i = 0; i < s.x.size(); ++i) {
    const double px = x0 + (s.x[i] - xmin) / (xmax - xmin) * pw;
    const double py = y0 + ph - (s.y[i] - ymin) / (ymax - ymin) * ph;
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
    pts += buf;
  }
  return "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" +
         pts + "\"/>\n";
}

inline std::string svg_panel(const PlotSeries& s, double x0, const std::string& color,
                             const std::string& title) {
  const double pw = 280, ph = 200, y0 = 30;
  double ymin = *std::min_element(s.y.begin(), s.y.end());
  double ymax = *std::max_element(s.y.begin(), s.y.end());
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%.0f\" y=\"%.0f\" width=\"%.0f\" height=\"%.0f\" fill=\"white\" "
                "stroke=\"#444\"/>\n",
                x0, y0, pw, ph);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.0f\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">%s</text>\n",
                x0, title.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.0f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"10\">%.3g</text>\n"
                "<text x=\"%.0f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"10\">%.3g</text>\n",
                x0 - 2, y0 + 10.0, ymax, x0 - 2, y0 + ph, ymin);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.0f\" y=\"%.0f\" font-family=\"sans-serif\" font-size=\"10\">threshold"
                "</text>\n",
                x0 + pw / 2 - 25, y0 + ph + 15);
  out += buf;
  out += svg_polyline(s, x0, y0, pw, ph, 0.0, 1.0, ymin, ymax, color);
  return out;
}

}  // namespace detail

/// Renders the IoU and HD95 threshold curves side by side as SVG.
inline void save_sweep_plot_svg(const MetricReport& r, const std::filesystem::path& path) {
  detail::PlotSeries iou{"IoU", r.iou_sweep.thresholds, r.iou_sweep.values};
  detail::PlotSeries hd{"HD95", r.hd95_sweep.thresholds, r.hd95_sweep.values};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write svg: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"270\">\n";
  out << "<!-- config_hash=" << r.config_hash << " seed=" << r.seed << " -->\n";
  out << detail::svg_panel(iou, 40, "#1f77b4", "IoU vs threshold");
  out << detail::svg_panel(hd, 380, "#d62728", "HD95 vs threshold");
  out << "</svg>\n";
}

namespace detail {

inline void draw_line(Grid& g, double x0, double y0, double x1, double y1, double value) {
  const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) * 2 + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (y >= 0 && y < g.height && x >= 0 && x < g.width) g.at(y, x) = value;
  }
}

inline void raster_panel(Grid& g, const PlotSeries& s, int x0, int y0, int pw, int ph) {
  double ymin = *std::min_element(s.y.begin(), s.y.end());
  double ymax = *std::max_element(s.y.begin(), s.y.end());
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  draw_line(g, x0, y0, x0, y0 + ph, 0.0);
  draw_line(g, x0, y0 + ph, x0 + pw, y0 + ph, 0.0);
  double px = 0, py = 0;
  for (size_t i = 0; i < s.x.size(); ++i) {
    const double cx = x0 + s.x[i] * pw;
    const double cy = y0 + ph - (s.y[i] - ymin) / (ymax - ymin) * ph;
    if (i > 0) draw_line(g, px, py, cx, cy, 0.25);
    px = cx;
    py = cy;
  }
}

}  // namespace detail

/// PNG rendering of the same curves (grayscale raster).
inline void save_sweep_plot_png(const MetricReport& r, const std::filesystem::path& path) {
  Grid g(270, 680, 1.0);
  detail::raster_panel(g, {"IoU", r.iou_sweep.thresholds, r.iou_sweep.values}, 40, 30, 280, 200);
  detail::raster_panel(g, {"HD95", r.hd95_sweep.thresholds, r.hd95_sweep.values}, 380, 30, 280,
                       200);
  Image img(g.height, g.width, 1);
  img.plane(0) = g;
  write_png8(path, img, {{"config_hash", r.config_hash}, {"seed", std::to_string(r.seed)}});
}

}  // namespace srseg
