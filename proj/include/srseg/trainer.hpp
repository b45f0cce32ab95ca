#pragma once

// Three-step training strategy:
//   Step 1: pre-train the SR network on a generic (crack-free) texture corpus
//           with the SR loss alone.
//   Step 2: finetune only the SR network on the crack dataset (beta = 0); the
//           segmentation parameters are frozen and stay bitwise unchanged.
//   Step 3: finetune the whole network on the joint loss
//           L_J = (1 - beta) L_S + beta L_C with the configured beta schedule,
//           composite segmentation loss, optional SR-loss weight maps, and
//           optional blur skip. step3_mode = "seg_only" freezes the SR network
//           instead and trains the segmentation head alone (the independent
//           baseline).
//
// All stochasticity is counter-based (seed, step, iteration, item), so a
// resumed run replays the identical batch sequence and loss trajectory.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "srseg/common.hpp"
#include "srseg/config.hpp"
#include "srseg/dataset.hpp"
#include "srseg/degradation.hpp"
#include "srseg/imaging.hpp"
#include "srseg/losses.hpp"
#include "srseg/metrics.hpp"
#include "srseg/nn/adam.hpp"
#include "srseg/nn/seg_network.hpp"
#include "srseg/nn/sr_network.hpp"
#include "srseg/report.hpp"
#include "srseg/weighting.hpp"

namespace srseg {

struct TrainLogEntry {
  int step = 0;
  int iter = 0;
  double l_j = 0.0;
  double l_s = 0.0;
  double l_c = 0.0;
  double beta = 0.0;
  double lr = 0.0;
  long long wallclock_ms = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"step", step}, {"iter", iter},     {"l_j", l_j},
                          {"l_s", l_s},   {"l_c", l_c},       {"beta", beta},
                          {"lr", lr},     {"wallclock_ms", wallclock_ms}};
  }
};

struct CheckpointManifest {
  int step = 0;
  int iteration = 0;
  double beta = 0.0;
  std::string config_hash;
};

namespace detail {

inline void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline void write_floats(std::ostream& out, const std::vector<float>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}
inline std::vector<float> read_floats(std::istream& in) {
  std::vector<float> v(read_u64(in));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
  return v;
}

inline void save_param_blob(std::ostream& out, std::vector<nn::ParamTensor*> params,
                            const nn::Adam& opt) {
  write_u64(out, params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    write_u64(out, params[i]->name.size());
    out.write(params[i]->name.data(), static_cast<std::streamsize>(params[i]->name.size()));
    write_floats(out, params[i]->value);
    write_floats(out, opt.first_moments()[i]);
    write_floats(out, opt.second_moments()[i]);
  }
  write_u64(out, static_cast<uint64_t>(opt.iterations()));
}

inline void load_param_blob(std::istream& in, std::vector<nn::ParamTensor*> params,
                            nn::Adam* opt) {
  const uint64_t n = read_u64(in);
  if (n != params.size()) throw StateError("checkpoint: parameter count mismatch");
  std::vector<std::vector<float>> ms, vs;
  for (size_t i = 0; i < n; ++i) {
    std::string name(read_u64(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != params[i]->name) throw StateError("checkpoint: parameter order mismatch at " + name);
    std::vector<float> value = read_floats(in);
    if (value.size() != params[i]->value.size())
      throw StateError("checkpoint: parameter size mismatch at " + name);
    params[i]->value = std::move(value);
    ms.push_back(read_floats(in));
    vs.push_back(read_floats(in));
  }
  const int64_t t = static_cast<int64_t>(read_u64(in));
  if (!in) throw StateError("checkpoint: truncated parameter blob");
  if (opt) opt->restore(ms, vs, t);
}

}  // namespace detail

/// Networks plus optimizers; constructible from a config alone (used by
/// predict, which loads parameters from a checkpoint).
struct ModelBundle {
  nn::SrNetwork sr;
  nn::SegNetwork seg;
  nn::Adam opt_sr;
  nn::Adam opt_seg;

  explicit ModelBundle(const RunConfig& cfg)
      : sr(nn::SrNetworkConfig{cfg.networks.in_channels, cfg.networks.sr_features,
                               cfg.networks.sr_blocks, 64, 16},
           derive_seed(cfg.seed, 0x57a001ull)),
        seg(nn::SegNetworkConfig{cfg.networks.in_channels, cfg.networks.seg_features,
                                 cfg.networks.kernel_embed, cfg.networks.blur_skip},
            derive_seed(cfg.seed, 0x57a002ull)),
        opt_sr(sr.parameters(), cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps),
        opt_seg(seg.parameters(), cfg.train.adam_beta1, cfg.train.adam_beta2,
                cfg.train.adam_eps) {}
};

inline void save_checkpoint(const std::filesystem::path& dir, ModelBundle& model,
                            const CheckpointManifest& manifest) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + (dir / "params.bin").string());
    out.write("SRSEGPB1", 8);
    detail::save_param_blob(out, model.sr.parameters(), model.opt_sr);
    detail::save_param_blob(out, model.seg.parameters(), model.opt_seg);
  }
  nlohmann::json j{{"step", manifest.step},
                   {"iteration", manifest.iteration},
                   {"beta", manifest.beta},
                   {"config_hash", manifest.config_hash}};
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

inline CheckpointManifest load_checkpoint(const std::filesystem::path& dir, ModelBundle& model,
                                          const std::string& expected_hash,
                                          bool restore_optimizers = true) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw StateError("missing checkpoint manifest: " + (dir / "manifest.json").string());
  nlohmann::json j;
  mf >> j;
  CheckpointManifest manifest;
  manifest.step = j.at("step").get<int>();
  manifest.iteration = j.at("iteration").get<int>();
  manifest.beta = j.at("beta").get<double>();
  manifest.config_hash = j.at("config_hash").get<std::string>();
  if (!expected_hash.empty() && manifest.config_hash != expected_hash)
    throw StateError("checkpoint config hash mismatch: expected " + expected_hash + ", found " +
                     manifest.config_hash);

  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw StateError("missing checkpoint blob: " + (dir / "params.bin").string());
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "SRSEGPB1", 8) != 0) throw StateError("bad checkpoint magic");
  detail::load_param_blob(in, model.sr.parameters(), restore_optimizers ? &model.opt_sr : nullptr);
  detail::load_param_blob(in, model.seg.parameters(),
                          restore_optimizers ? &model.opt_seg : nullptr);
  return manifest;
}

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg) : cfg_(cfg), hash_(cfg.hash()) {
    cfg_.validate();
    // The SR network upsamples x4, so training requires the matching scale.
    if (cfg_.scale.num != 1 || cfg_.scale.den != 4)
      throw ConfigError("training requires degradation scale 1/4 (SR network is x4)");
    build_datasets();
    if (cfg_.wce_auto_weights) derive_wce_weights();
    model_ = std::make_unique<ModelBundle>(cfg_);
    std::filesystem::create_directories(out_dir());
  }

  std::filesystem::path out_dir() const { return cfg_.out_dir; }
  const std::string& config_hash() const { return hash_; }
  const RunConfig& config() const { return cfg_; }
  ModelBundle& model() { return *model_; }
  const std::vector<TrainLogEntry>& log() const { return log_; }
  const LossConfig& effective_loss_config() const { return loss_cfg_; }

  /// Loads parameters, optimizer state, and position from a checkpoint.
  /// `strict_hash = false` allows resuming across configs that only differ in
  /// step-3 settings (used by the ablation runner).
  void resume(const std::filesystem::path& dir, bool strict_hash = true) {
    const CheckpointManifest m = load_checkpoint(dir, *model_, strict_hash ? hash_ : "");
    completed_step_ = m.iteration >= step_total(m.step) ? m.step : m.step - 1;
    step_iter_ = m.iteration >= step_total(m.step) ? 0 : m.iteration;
    resumed_step_ = m.iteration >= step_total(m.step) ? 0 : m.step;
  }

  /// Runs (the remainder of) a training step and writes ckpt_<step>.
  std::filesystem::path run_step(int step) {
    if (step < 1 || step > 3) throw ParameterError("train step must be 1, 2, or 3");
    if (step > 1 && completed_step_ < step - 1 && resumed_step_ != step)
      throw StateError("step " + std::to_string(step) + " requires the step " +
                       std::to_string(step - 1) + " checkpoint (run it or pass --resume)");

    const int total = step_total(step);
    const int start = resumed_step_ == step ? step_iter_ : 0;
    std::vector<uint8_t> seg_snapshot;
    if (step == 2) seg_snapshot = snapshot_seg_params();

    for (int it = start; it < total; ++it) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainLogEntry entry;
      if (step <= 2) {
        entry = sr_only_iteration(step, it);
      } else {
        entry = joint_iteration(it, total);
      }
      entry.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
      append_log(entry);
      if (cfg_.train.checkpoint_every > 0 && (it + 1) % cfg_.train.checkpoint_every == 0 &&
          it + 1 < total) {
        write_checkpoint(step, it + 1,
                         out_dir() / ("ckpt_step" + std::to_string(step) + "_iter" +
                                      std::to_string(it + 1)));
      }
    }

    if (step == 2 && seg_snapshot != snapshot_seg_params())
      throw StateError("segmentation parameters changed during step 2");

    completed_step_ = std::max(completed_step_, step);
    resumed_step_ = 0;
    step_iter_ = 0;
    const std::filesystem::path dir = out_dir() / ("ckpt_step" + std::to_string(step));
    write_checkpoint(step, total, dir);
    return dir;
  }

  /// Forward pass through both networks for one LR image (evaluation mode).
  struct Prediction {
    Image sr;
    BlurKernel kernel;
    ProbabilityMap prob_fg;
  };

  Prediction predict_one(const Image& lr) {
    nn::Tensor lr_t(1, lr.channels(), lr.height, lr.width);
    nn::image_to_tensor_item(lr, lr_t, 0);
    nn::SrNetwork::Output s = model_->sr.forward(lr_t);
    nn::Tensor prob =
        model_->seg.forward(s.sr, cfg_.networks.blur_skip ? &s.kernel : nullptr);
    Prediction p;
    p.sr = nn::tensor_to_image(s.sr, 0);
    p.kernel = nn::kernel_from_tensor(s.kernel, 0);
    p.prob_fg = nn::tensor_plane_to_grid(prob, 0, 1);
    return p;
  }

  /// Evaluates the current parameters on the test split. Deterministic:
  /// per-image degradations are derived from the run seed.
  MetricReport evaluate() {
    if (test_.empty()) throw DataError("evaluate: empty test split");
    MetricReport r;
    r.config_hash = hash_;
    r.seed = cfg_.seed;

    std::vector<ProbabilityMap> probs;
    std::vector<BinaryMask> gts;
    std::vector<double> psnrs, ssims, kpsnrs;
    for (size_t i = 0; i < test_.size(); ++i) {
      const DegradationSpec spec =
          sample_spec(derive_seed(cfg_.seed, 0xe7a1ull, i), cfg_.scale);
      auto [lr, kernel] = degrade(test_[i].image, spec);
      Prediction p = predict_one(lr);
      probs.push_back(p.prob_fg);
      gts.push_back(test_[i].mask);
      psnrs.push_back(psnr(p.sr, test_[i].image));
      ssims.push_back(ssim(p.sr, test_[i].image));
      kpsnrs.push_back(kernel_psnr(p.kernel, kernel));
    }

    const SweepSummary is = iou_sweep(probs, gts);
    const SweepSummary hs = hd95_sweep(probs, gts);
    r.iou_max = is.best;
    r.aiu = is.average;
    r.iou_best_threshold = is.best_threshold;
    r.hd95_min = hs.best;
    r.ahd95 = hs.average;
    r.hd95_best_threshold = hs.best_threshold;
    r.iou_sweep = is.sweep;
    r.hd95_sweep = hs.sweep;
    for (size_t i = 0; i < test_.size(); ++i) {
      PerImageMetrics m;
      m.id = "test_" + std::to_string(i);
      m.iou_at_best = iou(binarize(probs[i], is.best_threshold), gts[i]);
      m.hd95_at_best = hd95(binarize(probs[i], hs.best_threshold), gts[i]);
      m.psnr = psnrs[i];
      m.ssim = ssims[i];
      m.kernel_psnr = kpsnrs[i];
      r.per_image.push_back(m);
    }
    double ps = 0, ss = 0, ks = 0;
    for (size_t i = 0; i < test_.size(); ++i) {
      ps += psnrs[i];
      ss += ssims[i];
      ks += kpsnrs[i];
    }
    r.psnr = ps / static_cast<double>(test_.size());
    r.ssim = ss / static_cast<double>(test_.size());
    r.kernel_psnr = ks / static_cast<double>(test_.size());
    r.check_invariants();
    return r;
  }

  const std::vector<SynthSample>& test_set() const { return test_; }
  const std::vector<SynthSample>& train_set() const { return train_; }

 private:
  struct BatchItem {
    Image hr;
    BinaryMask mask;
    Image lr;
    BlurKernel kernel;
    uint64_t aug_seed = 0;
    uint64_t deg_seed = 0;
    size_t record = 0;
  };

  int step_total(int step) const {
    switch (step) {
      case 1: return cfg_.train.iters_step1;
      case 2: return cfg_.train.iters_step2;
      default: return cfg_.train.iters_step3;
    }
  }

  void build_datasets() {
    if (cfg_.dataset.type == "synthetic") {
      const auto all = synth_cracks(cfg_.dataset.count, cfg_.dataset.size,
                                    derive_seed(cfg_.seed, 0xdead5ull),
                                    cfg_.dataset.crack_free_frac);
      train_.assign(all.begin(), all.begin() + cfg_.dataset.train_count);
      test_.assign(all.begin() + cfg_.dataset.train_count,
                   all.begin() + cfg_.dataset.train_count + cfg_.dataset.test_count);
    } else {
      const Manifest m = load_manifest(cfg_.dataset.manifest);
      for (const auto& rec : m.records) {
        SynthSample s;
        s.image = read_png(rec.image);
        s.mask = read_mask_png(rec.mask);
        if (rec.split == "train")
          train_.push_back(std::move(s));
        else if (rec.split == "test")
          test_.push_back(std::move(s));
      }
      if (train_.empty() || test_.empty())
        throw DataError("manifest dataset needs non-empty train and test splits");
    }
    textures_ = synth_textures(cfg_.pretrain.count, cfg_.pretrain.size,
                               derive_seed(cfg_.seed, 0x7e55ull));
    loss_cfg_ = cfg_.loss;
  }

  void derive_wce_weights() {
    double fg = 0.0, total = 0.0;
    for (const auto& s : train_) {
      fg += static_cast<double>(s.mask.foreground_count());
      total += static_cast<double>(s.mask.size());
    }
    const double freq_fg = std::max(fg / total, 1e-7);
    const double freq_bg = std::max(1.0 - fg / total, 1e-7);
    loss_cfg_.wce_class_weights = {1.0 / freq_bg, 1.0 / freq_fg};
  }

  std::vector<uint8_t> snapshot_seg_params() {
    std::vector<uint8_t> bytes;
    for (nn::ParamTensor* p : model_->seg.parameters()) {
      const auto* raw = reinterpret_cast<const uint8_t*>(p->value.data());
      bytes.insert(bytes.end(), raw, raw + p->value.size() * sizeof(float));
    }
    return bytes;
  }

  BatchItem make_item(int step, int iter, int slot) {
    const uint64_t item_seed =
        derive_seed(cfg_.seed, static_cast<uint64_t>(step), static_cast<uint64_t>(iter),
                    static_cast<uint64_t>(slot));
    BatchItem item;
    item.aug_seed = splitmix64(item_seed ^ 0xau);
    item.deg_seed = splitmix64(item_seed ^ 0xdu);
    if (step == 1) {
      item.record = item_seed % textures_.size();
      const Image& src = textures_[item.record];
      BinaryMask dummy(src.height, src.width);
      auto [img, mask] = augment(src, dummy, cfg_.train.patch, item.aug_seed);
      item.hr = std::move(img);
      item.mask = std::move(mask);
    } else {
      item.record = item_seed % train_.size();
      const SynthSample& src = train_[item.record];
      auto [img, mask] = augment(src.image, src.mask, cfg_.train.patch, item.aug_seed);
      item.hr = std::move(img);
      item.mask = std::move(mask);
    }
    const DegradationSpec spec = sample_spec(item.deg_seed, cfg_.scale);
    auto [lr, kernel] = degrade(item.hr, spec);
    item.lr = std::move(lr);
    item.kernel = kernel;
    return item;
  }

  // Steps 1 and 2: SR loss only, beta = 0, segmentation untouched.
  TrainLogEntry sr_only_iteration(int step, int iter) {
    const int batch = cfg_.train.batch_size;
    std::vector<BatchItem> items;
    items.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) items.push_back(make_item(step, iter, b));

    nn::Tensor lr_t(batch, cfg_.networks.in_channels, items[0].lr.height, items[0].lr.width);
    for (int b = 0; b < batch; ++b) nn::image_to_tensor_item(items[b].lr, lr_t, b);

    nn::SrNetwork::Output out = model_->sr.forward(lr_t);

    nn::Tensor dsr(out.sr.n, out.sr.c, out.sr.h, out.sr.w);
    nn::Tensor dk(batch, kKernelArea, 1, 1);
    double l_s = 0.0;
    for (int b = 0; b < batch; ++b) {
      const Image sr_img = nn::tensor_to_image(out.sr, b);
      const BlurKernel kp = nn::kernel_from_tensor(out.kernel, b);
      SrLossResult res = sr_loss(sr_img, items[static_cast<size_t>(b)].hr, kp,
                                 items[static_cast<size_t>(b)].kernel,
                                 loss_cfg_.kernel_loss_weight);
      l_s += res.value / batch;
      const double scale = 1.0 / batch;
      for (int c = 0; c < out.sr.c; ++c)
        for (int y = 0; y < out.sr.h; ++y)
          for (int x = 0; x < out.sr.w; ++x)
            dsr.at(b, c, y, x) = static_cast<float>(scale * res.grad_sr.plane(c).at(y, x));
      BlurKernel kg = res.grad_kernel;
      for (double& g : kg.v) g *= scale;
      nn::kernel_grad_to_tensor(kg, dk, b);
    }
    check_finite(l_s, 0.0, 0.0, step, iter, items);

    const double lr = step == 1 ? cfg_.train.lr_pretrain : cfg_.train.lr_finetune;
    model_->opt_sr.zero_grad();
    model_->sr.backward(dsr, dk);
    model_->opt_sr.step(lr);

    TrainLogEntry e;
    e.step = step;
    e.iter = iter;
    e.l_s = l_s;
    e.l_c = 0.0;
    e.beta = 0.0;
    e.l_j = joint_loss(l_s, 0.0, 0.0);
    e.lr = lr;
    return e;
  }

  // Step 3: joint loss with the configured beta schedule and weight maps.
  TrainLogEntry joint_iteration(int iter, int total) {
    const int batch = cfg_.train.batch_size;
    const double beta = beta_at(iter, total, cfg_.train.beta_schedule);
    const bool seg_only = cfg_.train.step3_mode == "seg_only";

    std::vector<BatchItem> items;
    items.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) items.push_back(make_item(3, iter, b));

    nn::Tensor lr_t(batch, cfg_.networks.in_channels, items[0].lr.height, items[0].lr.width);
    for (int b = 0; b < batch; ++b) nn::image_to_tensor_item(items[b].lr, lr_t, b);

    nn::SrNetwork::Output s = model_->sr.forward(lr_t);
    const bool use_skip = cfg_.networks.blur_skip;
    nn::Tensor prob = model_->seg.forward(s.sr, use_skip ? &s.kernel : nullptr);

    nn::Tensor dprob(prob.n, prob.c, prob.h, prob.w);
    nn::Tensor dsr(s.sr.n, s.sr.c, s.sr.h, s.sr.w);
    nn::Tensor dk(batch, kKernelArea, 1, 1);

    double l_s_total = 0.0, l_c_total = 0.0;
    for (int b = 0; b < batch; ++b) {
      const BatchItem& item = items[static_cast<size_t>(b)];
      const Image sr_img = nn::tensor_to_image(s.sr, b);
      const BlurKernel kp = nn::kernel_from_tensor(s.kernel, b);

      TwoClass pred{nn::tensor_plane_to_grid(prob, b, 0), nn::tensor_plane_to_grid(prob, b, 1)};
      const TwoClass gt = one_hot(item.mask);
      const LevelSetMap phi = level_set(item.mask);

      // Segmentation loss, optionally FO-weighted on its pixelwise terms.
      std::optional<Grid> fo_seg;
      if (cfg_.weights.use_fo_weight && cfg_.weights.fo_target == "seg_loss")
        fo_seg = fo_weight_map(pred[1], item.mask, cfg_.weights.m_f);
      const SegLossResult seg =
          seg_loss(pred, gt, phi, loss_cfg_, fo_seg ? &*fo_seg : nullptr);

      // SR loss with the configured weight maps (all detached).
      std::vector<Grid> maps;
      if (cfg_.weights.use_lc_weight) maps.push_back(seg_loss_map(pred, gt, phi, loss_cfg_));
      if (cfg_.weights.use_co_weight) maps.push_back(co_weight_map(item.mask, cfg_.weights.m_c));
      if (cfg_.weights.use_fo_weight && cfg_.weights.fo_target == "sr_loss")
        maps.push_back(fo_weight_map(pred[1], item.mask, cfg_.weights.m_f));
      const Grid wmap = product_map(sr_img.height, sr_img.width, maps);
      const SrLossResult sres = sr_loss(sr_img, item.hr, kp, item.kernel,
                                        loss_cfg_.kernel_loss_weight, &wmap);

      l_s_total += sres.value / batch;
      l_c_total += seg.value / batch;

      const double c_scale = beta / batch;
      for (int ch = 0; ch < 2; ++ch)
        for (int y = 0; y < prob.h; ++y)
          for (int x = 0; x < prob.w; ++x)
            dprob.at(b, ch, y, x) =
                static_cast<float>(c_scale * seg.grad[static_cast<size_t>(ch)].at(y, x));

      if (!seg_only) {
        const double s_scale = (1.0 - beta) / batch;
        for (int c = 0; c < dsr.c; ++c)
          for (int y = 0; y < dsr.h; ++y)
            for (int x = 0; x < dsr.w; ++x)
              dsr.at(b, c, y, x) = static_cast<float>(s_scale * sres.grad_sr.plane(c).at(y, x));
        BlurKernel kg = sres.grad_kernel;
        for (double& g : kg.v) g *= s_scale;
        nn::kernel_grad_to_tensor(kg, dk, b);
      }
    }

    const double l_j = joint_loss(l_s_total, l_c_total, beta);
    check_finite(l_s_total, l_c_total, beta, 3, iter, items);

    model_->opt_seg.zero_grad();
    nn::SegNetwork::Grads cg = model_->seg.backward(dprob);
    model_->opt_seg.step(cfg_.train.lr_finetune);

    if (!seg_only) {
      nn::Tensor dsr_total = nn::add(dsr, cg.dinput);
      nn::Tensor dk_total = cg.dkernel ? nn::add(dk, *cg.dkernel) : dk;
      model_->opt_sr.zero_grad();
      model_->sr.backward(dsr_total, dk_total);
      model_->opt_sr.step(cfg_.train.lr_finetune);
    }

    TrainLogEntry e;
    e.step = 3;
    e.iter = iter;
    e.l_s = l_s_total;
    e.l_c = l_c_total;
    e.beta = beta;
    e.l_j = l_j;
    e.lr = cfg_.train.lr_finetune;
    return e;
  }

  void check_finite(double l_s, double l_c, double beta, int step, int iter,
                    const std::vector<BatchItem>& items) {
    if (std::isfinite(l_s) && std::isfinite(l_c)) return;
    nlohmann::json dump{{"step", step}, {"iter", iter},   {"l_s", l_s},
                        {"l_c", l_c},   {"beta", beta},   {"config_hash", hash_}};
    nlohmann::json batch = nlohmann::json::array();
    for (const auto& it : items)
      batch.push_back({{"record", it.record}, {"aug_seed", it.aug_seed},
                       {"deg_seed", it.deg_seed}});
    dump["batch"] = batch;
    std::ofstream out(out_dir() / "nan_dump.json");
    out << dump.dump(2) << "\n";
    throw RuntimeAbort("non-finite loss at step " + std::to_string(step) + " iter " +
                       std::to_string(iter) + "; diagnostics in nan_dump.json");
  }

  void append_log(const TrainLogEntry& e) {
    log_.push_back(e);
    std::ofstream out(out_dir() / "train_log.jsonl", std::ios::app);
    out << e.to_json().dump() << "\n";
  }

  void write_checkpoint(int step, int iteration, const std::filesystem::path& dir) {
    CheckpointManifest m;
    m.step = step;
    m.iteration = iteration;
    m.beta = step < 3 ? 0.0
                      : beta_at(std::min(iteration, step_total(3)), step_total(3),
                                cfg_.train.beta_schedule);
    m.config_hash = hash_;
    save_checkpoint(dir, *model_, m);
  }

  RunConfig cfg_;
  std::string hash_;
  LossConfig loss_cfg_;
  std::unique_ptr<ModelBundle> model_;
  std::vector<SynthSample> train_, test_;
  std::vector<Image> textures_;
  std::vector<TrainLogEntry> log_;
  int completed_step_ = 0;
  int resumed_step_ = 0;
  int step_iter_ = 0;
};

}  // namespace srseg
