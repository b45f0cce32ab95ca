// srseg command-line interface.
//
// Subcommands: degrade, train, eval, predict, sweep-plot, ablate.
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime/NaN abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srseg/config.hpp"
#include "srseg/dataset.hpp"
#include "srseg/degradation.hpp"
#include "srseg/metrics.hpp"
#include "srseg/png_io.hpp"
#include "srseg/report.hpp"
#include "srseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw srseg::DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw srseg::DataError("no PNG files in " + dir.string());
  return out;
}

srseg::Image adapt_channels(const srseg::Image& img, int want) {
  if (img.channels() == want) return img;
  srseg::Image out(img.height, img.width, want);
  if (want == 1) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double v = 0.0;
        for (int c = 0; c < img.channels(); ++c) v += img.plane(c).at(y, x);
        out.plane(0).at(y, x) = v / img.channels();
      }
  } else {
    for (int c = 0; c < want; ++c) out.plane(c) = img.plane(0);
  }
  return out;
}

int run_degrade(const fs::path& in_dir, const fs::path& out_dir, uint64_t seed,
                srseg::Fraction scale) {
  fs::create_directories(out_dir);
  const auto files = list_pngs(in_dir);
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const srseg::Image hr = srseg::read_png(file);
    const uint64_t item_seed = srseg::derive_seed(seed, srseg::fnv1a64(stem));
    const srseg::DegradationSpec spec = srseg::sample_spec(item_seed, scale);
    auto [lr, kernel] = srseg::degrade(hr, spec);

    const std::string hash = srseg::hex64(srseg::fnv1a64("degrade:" + std::to_string(seed)));
    srseg::write_png8(out_dir / (stem + ".png"), lr,
                      {{"config_hash", hash}, {"seed", std::to_string(item_seed)}});

    json sidecar{{"sigma_a", spec.sigma_a},
                 {"sigma_b", spec.sigma_b},
                 {"theta", spec.theta},
                 {"scale", {spec.scale.num, spec.scale.den}},
                 {"seed", spec.seed},
                 {"kernel", std::vector<double>(kernel.v.begin(), kernel.v.end())}};
    std::ofstream out(out_dir / (stem + ".json"));
    out << sidecar.dump(2) << "\n";
  }
  std::cout << "degraded " << files.size() << " images into " << out_dir << "\n";
  return 0;
}

void export_dataset(const srseg::Trainer& trainer, const fs::path& dir, uint64_t seed) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  srseg::Manifest manifest;
  manifest.seed = seed;
  const auto dump_split = [&](const std::vector<srseg::SynthSample>& split,
                              const std::string& name) {
    for (size_t i = 0; i < split.size(); ++i) {
      const std::string stem = name + "_" + std::to_string(i);
      const fs::path img = dir / "images" / (stem + ".png");
      const fs::path msk = dir / "masks" / (stem + ".png");
      srseg::write_png8(img, split[i].image);
      srseg::write_mask_png(msk, split[i].mask);
      manifest.records.push_back({img.string(), msk.string(), name, ""});
    }
  };
  dump_split(trainer.train_set(), "train");
  dump_split(trainer.test_set(), "test");
  srseg::save_manifest(manifest, dir / "manifest.json");
}

int run_train(const fs::path& config_path, int step, const std::string& resume,
              const std::string& out_override, std::optional<uint64_t> seed_override,
              bool eval_after, bool export_data, bool allow_hash_mismatch) {
  srseg::RunConfig cfg = srseg::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override) cfg.seed = *seed_override;

  srseg::Trainer trainer(cfg);
  if (!resume.empty()) trainer.resume(resume, !allow_hash_mismatch);
  if (export_data) export_dataset(trainer, trainer.out_dir() / "dataset", cfg.seed);

  const fs::path ckpt = trainer.run_step(step);
  std::cout << "step " << step << " complete; checkpoint at " << ckpt << "\n";

  if (eval_after) {
    const srseg::MetricReport report = trainer.evaluate();
    const fs::path report_path = trainer.out_dir() / ("report_step" + std::to_string(step) + ".json");
    srseg::save_report(report, report_path);
    srseg::save_sweep_csv(report, trainer.out_dir() / ("sweep_step" + std::to_string(step) + ".csv"));
    std::cout << "IoU_max=" << report.iou_max << " AIU=" << report.aiu
              << " HD95_min=" << report.hd95_min << " AHD95=" << report.ahd95
              << " PSNR=" << report.psnr << " SSIM=" << report.ssim
              << " kernel_PSNR=" << report.kernel_psnr << "\n";
    std::cout << "report written to " << report_path << "\n";
  }
  return 0;
}

int run_eval(const fs::path& pred_dir, const fs::path& gt_dir, const fs::path& out_path,
             const std::string& csv_path, const std::string& sr_dir, const std::string& hr_dir,
             const std::string& pred_kernel_dir, const std::string& gt_kernel_dir,
             uint64_t seed) {
  const auto pred_files = list_pngs(pred_dir);

  std::vector<srseg::ProbabilityMap> probs;
  std::vector<srseg::BinaryMask> gts;
  std::vector<std::string> stems;
  for (const auto& f : pred_files) {
    const fs::path gt = gt_dir / f.filename();
    if (!fs::exists(gt)) throw srseg::DataError("missing ground truth for " + f.string());
    probs.push_back(srseg::read_probability_png(f));
    gts.push_back(srseg::read_mask_png(gt));
    stems.push_back(f.stem().string());
  }

  srseg::MetricReport r;
  r.seed = seed;
  r.config_hash = srseg::hex64(srseg::fnv1a64("eval:" + pred_dir.string() + ":" +
                                              gt_dir.string() + ":" + std::to_string(seed)));
  const srseg::SweepSummary is = srseg::iou_sweep(probs, gts);
  const srseg::SweepSummary hs = srseg::hd95_sweep(probs, gts);
  r.iou_max = is.best;
  r.aiu = is.average;
  r.iou_best_threshold = is.best_threshold;
  r.hd95_min = hs.best;
  r.ahd95 = hs.average;
  r.hd95_best_threshold = hs.best_threshold;
  r.iou_sweep = is.sweep;
  r.hd95_sweep = hs.sweep;

  double psnr_sum = 0.0, ssim_sum = 0.0, kpsnr_sum = 0.0;
  int psnr_n = 0, kpsnr_n = 0;
  for (size_t i = 0; i < stems.size(); ++i) {
    srseg::PerImageMetrics m;
    m.id = stems[i];
    m.iou_at_best = srseg::iou(srseg::binarize(probs[i], is.best_threshold), gts[i]);
    m.hd95_at_best = srseg::hd95(srseg::binarize(probs[i], hs.best_threshold), gts[i]);
    if (!sr_dir.empty() && !hr_dir.empty()) {
      const fs::path sp = fs::path(sr_dir) / (stems[i] + ".png");
      const fs::path hp = fs::path(hr_dir) / (stems[i] + ".png");
      if (fs::exists(sp) && fs::exists(hp)) {
        const srseg::Image a = srseg::read_png(sp);
        const srseg::Image b = srseg::read_png(hp);
        m.psnr = srseg::psnr(a, b);
        m.ssim = srseg::ssim(a, b);
        psnr_sum += m.psnr;
        ssim_sum += m.ssim;
        ++psnr_n;
      }
    }
    if (!pred_kernel_dir.empty() && !gt_kernel_dir.empty()) {
      const fs::path pk = fs::path(pred_kernel_dir) / (stems[i] + ".json");
      const fs::path gk = fs::path(gt_kernel_dir) / (stems[i] + ".json");
      if (fs::exists(pk) && fs::exists(gk)) {
        const auto load_kernel = [](const fs::path& p) {
          std::ifstream in(p);
          json j;
          in >> j;
          const auto arr = j.at("kernel").get<std::vector<double>>();
          if (arr.size() != srseg::kKernelArea)
            throw srseg::DataError("kernel sidecar has wrong length: " + p.string());
          srseg::BlurKernel k;
          std::copy(arr.begin(), arr.end(), k.v.begin());
          return k;
        };
        m.kernel_psnr = srseg::kernel_psnr(load_kernel(pk), load_kernel(gk));
        kpsnr_sum += m.kernel_psnr;
        ++kpsnr_n;
      }
    }
    r.per_image.push_back(m);
  }
  if (psnr_n > 0) {
    r.psnr = psnr_sum / psnr_n;
    r.ssim = ssim_sum / psnr_n;
  }
  if (kpsnr_n > 0) r.kernel_psnr = kpsnr_sum / kpsnr_n;

  srseg::save_report(r, out_path);
  if (!csv_path.empty()) srseg::save_sweep_csv(r, csv_path);
  std::cout << "IoU_max=" << r.iou_max << " AIU=" << r.aiu << " HD95_min=" << r.hd95_min
            << " AHD95=" << r.ahd95 << "\n";
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

int run_predict(const fs::path& config_path, const fs::path& ckpt, const fs::path& in_dir,
                const fs::path& out_dir, const std::string& report_path, double threshold,
                bool threshold_given) {
  const srseg::RunConfig cfg = srseg::load_config(config_path);
  srseg::ModelBundle model(cfg);
  srseg::load_checkpoint(ckpt, model, cfg.hash(), /*restore_optimizers=*/false);

  if (!threshold_given) {
    threshold = 0.5;
    if (!report_path.empty()) {
      const srseg::MetricReport r = srseg::load_report(report_path);
      threshold = r.iou_best_threshold;
    }
  }

  fs::create_directories(out_dir);
  const std::map<std::string, std::string> text{{"config_hash", cfg.hash()},
                                                {"seed", std::to_string(cfg.seed)}};
  json files = json::array();
  for (const auto& f : list_pngs(in_dir)) {
    const std::string stem = f.stem().string();
    const srseg::Image lr = adapt_channels(srseg::read_png(f), cfg.networks.in_channels);

    srseg::nn::Tensor lr_t(1, lr.channels(), lr.height, lr.width);
    srseg::nn::image_to_tensor_item(lr, lr_t, 0);
    srseg::nn::SrNetwork::Output s = model.sr.forward(lr_t);
    srseg::nn::Tensor prob =
        model.seg.forward(s.sr, cfg.networks.blur_skip ? &s.kernel : nullptr);

    const srseg::Image sr = srseg::nn::tensor_to_image(s.sr, 0);
    const srseg::Grid prob_fg = srseg::nn::tensor_plane_to_grid(prob, 0, 1);
    srseg::write_png8(out_dir / (stem + "_sr.png"), sr, text);
    srseg::write_png16(out_dir / (stem + "_prob.png"), prob_fg, text);
    srseg::write_mask_png(out_dir / (stem + "_mask.png"), srseg::binarize(prob_fg, threshold),
                          text);
    files.push_back(stem);
  }

  json manifest{{"config_hash", cfg.hash()},
                {"seed", cfg.seed},
                {"threshold", threshold},
                {"checkpoint", ckpt.string()},
                {"inputs", files}};
  std::ofstream out(out_dir / "predict_manifest.json");
  out << manifest.dump(2) << "\n";
  std::cout << "predictions for " << files.size() << " images written to " << out_dir
            << " (threshold " << threshold << ")\n";
  return 0;
}

int run_sweep_plot(const fs::path& report_path, const fs::path& out_dir,
                   const std::string& format) {
  const srseg::MetricReport r = srseg::load_report(report_path);
  fs::create_directories(out_dir);
  if (format == "svg" || format == "both")
    srseg::save_sweep_plot_svg(r, out_dir / "sweep.svg");
  if (format == "png" || format == "both")
    srseg::save_sweep_plot_png(r, out_dir / "sweep.png");
  std::cout << "plots written to " << out_dir << "\n";
  return 0;
}

struct AblationRow {
  std::string setting;
  srseg::MetricReport report;
};

int run_ablate(const fs::path& config_path, const std::string& axis,
               const std::string& out_override, std::optional<uint64_t> seed_override) {
  srseg::RunConfig base = srseg::load_config(config_path);
  if (!out_override.empty()) base.out_dir = out_override;
  if (seed_override) base.seed = *seed_override;

  struct Setting {
    std::string name;
    std::function<void(srseg::RunConfig&)> apply;
  };
  std::vector<Setting> settings;
  if (axis == "beta") {
    for (const std::string b : {"0.1", "0.3", "0.5", "0.7", "0.9", "1.0"})
      settings.push_back({"beta=" + b, [b](srseg::RunConfig& c) {
                            c.train.beta_schedule = "fixed:" + b;
                          }});
    settings.push_back({"beta=increasing", [](srseg::RunConfig& c) {
                          c.train.beta_schedule = "increasing";
                        }});
  } else if (axis == "loss") {
    for (const std::string l : {"bc", "gbc", "wce", "dice", "combo", "boundary+gdice"})
      settings.push_back({"loss=" + l, [l](srseg::RunConfig& c) {
                            c.loss.seg_loss = srseg::parse_seg_loss(l);
                          }});
  } else if (axis == "weights") {
    settings.push_back({"baseline", [](srseg::RunConfig&) {}});
    settings.push_back({"lc", [](srseg::RunConfig& c) { c.weights.use_lc_weight = true; }});
    settings.push_back({"co_m8", [](srseg::RunConfig& c) {
                          c.weights.use_co_weight = true;
                          c.weights.m_c = 8.0;
                        }});
    settings.push_back({"fo_m1", [](srseg::RunConfig& c) {
                          c.weights.use_fo_weight = true;
                          c.weights.m_f = 1.0;
                          c.weights.fo_target = "sr_loss";
                        }});
    settings.push_back({"fo_seg_m0.5", [](srseg::RunConfig& c) {
                          c.weights.use_fo_weight = true;
                          c.weights.m_f = 0.5;
                          c.weights.fo_target = "seg_loss";
                        }});
  } else if (axis == "blur_skip") {
    settings.push_back({"off", [](srseg::RunConfig& c) { c.networks.blur_skip = false; }});
    settings.push_back({"on", [](srseg::RunConfig& c) { c.networks.blur_skip = true; }});
    settings.push_back({"on_fo_m1", [](srseg::RunConfig& c) {
                          c.networks.blur_skip = true;
                          c.weights.use_fo_weight = true;
                          c.weights.m_f = 1.0;
                          c.weights.fo_target = "sr_loss";
                        }});
  } else {
    throw srseg::ParameterError("unknown ablation axis: " + axis +
                                " (expected beta|loss|weights|blur_skip)");
  }

  // Steps 1-2 are unaffected by step-3 settings; run them once and share.
  const fs::path shared_dir = fs::path(base.out_dir) / "shared";
  fs::path shared_ckpt;
  {
    srseg::RunConfig shared = base;
    shared.out_dir = shared_dir.string();
    srseg::Trainer t(shared);
    t.run_step(1);
    shared_ckpt = t.run_step(2);
  }

  std::vector<AblationRow> rows;
  for (const auto& s : settings) {
    srseg::RunConfig cfg = base;
    s.apply(cfg);
    std::string dir_name = s.name;
    for (char& ch : dir_name)
      if (ch == '=' || ch == '+' || ch == '.') ch = '_';
    cfg.out_dir = (fs::path(base.out_dir) / dir_name).string();
    srseg::Trainer t(cfg);
    t.resume(shared_ckpt, /*strict_hash=*/false);
    t.run_step(3);
    rows.push_back({s.name, t.evaluate()});
    std::cout << s.name << ": IoU_max=" << rows.back().report.iou_max
              << " AIU=" << rows.back().report.aiu << "\n";
  }

  json jrows = json::array();
  for (const auto& row : rows)
    jrows.push_back({{"setting", row.setting}, {"report", row.report.to_json()}});
  json table{{"axis", axis},
             {"seed", base.seed},
             {"config_hash", base.hash()},
             {"rows", jrows}};
  fs::create_directories(base.out_dir);
  {
    std::ofstream out(fs::path(base.out_dir) / ("ablation_" + axis + ".json"));
    out << table.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(base.out_dir) / ("ablation_" + axis + ".csv"));
    out << "# config_hash=" << base.hash() << " seed=" << base.seed << "\n";
    out << "setting,IoU_max,AIU,HD95_min,AHD95,PSNR,SSIM,kernel_PSNR\n";
    char buf[256];
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    row.setting.c_str(), row.report.iou_max, row.report.aiu,
                    row.report.hd95_min, row.report.ahd95, row.report.psnr, row.report.ssim,
                    row.report.kernel_psnr);
      out << buf;
    }
  }
  std::cout << "ablation table written to " << base.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint blind super-resolution and crack segmentation"};
  app.require_subcommand(1);
  app.fallthrough();  // global --config/--seed/--out may follow the subcommand

  std::string config_path, out_dir, resume, report_path;
  std::optional<uint64_t> seed_opt;
  app.add_option("--config", config_path, "Run configuration JSON")->envname("SRSEG_CONFIG");
  app.add_option("--seed", seed_opt, "Seed override");
  app.add_option("--out", out_dir, "Output directory override");

  auto* degrade_cmd = app.add_subcommand("degrade", "Blur + downsample a directory of HR PNGs");
  std::string deg_in, deg_out = "degraded";
  uint64_t deg_seed = 0;
  std::vector<int> deg_scale{1, 4};
  degrade_cmd->add_option("--in", deg_in, "Directory of HR PNGs")->required();
  degrade_cmd->add_option("--out-dir", deg_out, "Output directory");
  degrade_cmd->add_option("--degrade-seed", deg_seed, "Sampling seed");
  degrade_cmd->add_option("--scale", deg_scale, "Scale as NUM DEN")->expected(2);

  auto* train_cmd = app.add_subcommand("train", "Run one training step");
  int step = 0;
  bool eval_after = false, export_data = false, allow_mismatch = false;
  train_cmd->add_option("--step", step, "Training step (1, 2, or 3)")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint directory to resume from");
  train_cmd->add_flag("--eval", eval_after, "Evaluate on the test split after the step");
  train_cmd->add_flag("--export-dataset", export_data, "Materialize the dataset as PNGs");
  train_cmd->add_flag("--allow-hash-mismatch", allow_mismatch,
                      "Resume from a checkpoint of a config that differs in step-3 settings");

  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_out = "report.json", ev_csv, ev_sr, ev_hr, ev_pk, ev_gk;
  uint64_t ev_seed = 0;
  eval_cmd->add_option("--pred", ev_pred, "Directory of probability PNGs")->required();
  eval_cmd->add_option("--gt", ev_gt, "Directory of ground-truth mask PNGs")->required();
  eval_cmd->add_option("--report", ev_out, "Output report JSON path");
  eval_cmd->add_option("--csv", ev_csv, "Optional per-threshold CSV path");
  eval_cmd->add_option("--sr", ev_sr, "Optional SR image directory (for PSNR/SSIM)");
  eval_cmd->add_option("--hr", ev_hr, "Optional HR reference directory (for PSNR/SSIM)");
  eval_cmd->add_option("--pred-kernels", ev_pk, "Optional predicted-kernel sidecar directory");
  eval_cmd->add_option("--gt-kernels", ev_gk, "Optional ground-truth kernel sidecar directory");
  eval_cmd->add_option("--eval-seed", ev_seed, "Seed recorded in the report");

  auto* predict_cmd = app.add_subcommand("predict", "SR + segmentation for LR images");
  std::string pr_ckpt, pr_in, pr_out = "predictions";
  double pr_threshold = 0.5;
  predict_cmd->add_option("--ckpt", pr_ckpt, "Checkpoint directory")->required();
  predict_cmd->add_option("--in", pr_in, "Directory of LR PNGs")->required();
  predict_cmd->add_option("--out-dir", pr_out, "Output directory");
  predict_cmd->add_option("--report", report_path, "Eval report supplying the default threshold");
  auto* thr_opt = predict_cmd->add_option("--threshold", pr_threshold, "Binarization threshold");

  auto* plot_cmd = app.add_subcommand("sweep-plot", "Render threshold-sweep curves");
  std::string pl_report, pl_out = "plots", pl_format = "svg";
  plot_cmd->add_option("--report", pl_report, "Metric report JSON")->required();
  plot_cmd->add_option("--out-dir", pl_out, "Output directory");
  plot_cmd->add_option("--format", pl_format, "svg | png | both")
      ->check(CLI::IsMember({"svg", "png", "both"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation study over one axis");
  std::string ab_axis;
  ablate_cmd->add_option("--axis", ab_axis, "beta | loss | weights | blur_skip")->required();

  try {
    app.parse(argc, argv);

    if (degrade_cmd->parsed())
      return run_degrade(deg_in, deg_out, deg_seed, {deg_scale[0], deg_scale[1]});
    if (train_cmd->parsed()) {
      if (config_path.empty()) throw srseg::ConfigError("train requires --config");
      return run_train(config_path, step, resume, out_dir, seed_opt, eval_after, export_data,
                       allow_mismatch);
    }
    if (eval_cmd->parsed())
      return run_eval(ev_pred, ev_gt, ev_out, ev_csv, ev_sr, ev_hr, ev_pk, ev_gk, ev_seed);
    if (predict_cmd->parsed()) {
      if (config_path.empty()) throw srseg::ConfigError("predict requires --config");
      return run_predict(config_path, pr_ckpt, pr_in, pr_out, report_path, pr_threshold,
                         thr_opt->count() > 0);
    }
    if (plot_cmd->parsed()) return run_sweep_plot(pl_report, pl_out, pl_format);
    if (ablate_cmd->parsed()) {
      if (config_path.empty()) throw srseg::ConfigError("ablate requires --config");
      return run_ablate(config_path, ab_axis, out_dir, seed_opt);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const srseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const srseg::StateError& e) {
    std::cerr << "state error: " << e.what() << "\n";
    return 2;
  } catch (const srseg::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const srseg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return 4;
  }
}
