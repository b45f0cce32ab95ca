#pragma once

// Run configuration: JSON parsing, strict validation, defaulting, and the
// config hash embedded in every artifact. The published schema lives in
// share/run_config.schema.json; validate() enforces the same constraints.

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "srseg/common.hpp"
#include "srseg/grid.hpp"
#include "srseg/losses.hpp"
#include "srseg/weighting.hpp"

namespace srseg {

struct DatasetConfig {
  std::string type = "synthetic";  // "synthetic" | "manifest"
  int count = 80;
  int size = 64;
  double crack_free_frac = 0.1;
  int train_count = 64;
  int test_count = 16;
  std::string manifest;  // when type == "manifest"

  void validate() const {
    if (type != "synthetic" && type != "manifest")
      throw ConfigError("dataset.type must be synthetic or manifest");
    if (type == "synthetic") {
      if (size < 32) throw ConfigError("dataset.size must be >= 32");
      if (train_count <= 0 || test_count <= 0 || train_count + test_count > count)
        throw ConfigError("dataset counts must satisfy train+test <= count");
    } else if (manifest.empty()) {
      throw ConfigError("dataset.manifest path required for manifest datasets");
    }
  }
};

struct PretrainConfig {
  int count = 32;
  int size = 64;
};

struct NetworkConfig {
  int in_channels = 1;
  int sr_features = 16;
  int sr_blocks = 3;
  int seg_features = 12;
  int kernel_embed = 32;
  bool blur_skip = false;

  void validate() const {
    if (in_channels != 1 && in_channels != 3)
      throw ConfigError("networks.in_channels must be 1 or 3");
    if (sr_features < 1 || sr_blocks < 1 || seg_features < 1 || kernel_embed < 1)
      throw ConfigError("network sizes must be positive");
  }
};

struct TrainConfig {
  int iters_step1 = 200000;
  int iters_step2 = 30000;
  int iters_step3 = 150000;
  int batch_size = 6;
  double lr_pretrain = 2e-4;
  double lr_finetune = 2e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string beta_schedule = "fixed:0.5";
  int patch = 64;
  std::string step3_mode = "joint";  // "joint" | "seg_only"
  int checkpoint_every = 0;          // 0 = only at step end

  void validate() const {
    if (iters_step1 <= 0 || iters_step2 <= 0 || iters_step3 <= 0)
      throw ConfigError("train iterations must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (lr_pretrain <= 0.0 || lr_finetune <= 0.0) throw ConfigError("learning rates must be positive");
    if (patch < 16) throw ConfigError("train.patch must be >= 16");
    if (step3_mode != "joint" && step3_mode != "seg_only")
      throw ConfigError("train.step3_mode must be joint or seg_only");
    beta_check();
  }

  void beta_check() const;
};

/// Task-weight schedule: "fixed:<value>" or "increasing" (0 to 1 in
/// proportion to iterations).
inline double beta_at(int iteration, int total, const std::string& schedule) {
  if (iteration < 0 || iteration > total) throw ParameterError("beta_at: iteration out of range");
  if (schedule == "increasing") {
    if (total == 0) return 0.0;
    return static_cast<double>(iteration) / static_cast<double>(total);
  }
  if (schedule.starts_with("fixed:")) {
    const double b = std::stod(schedule.substr(6));
    if (b < 0.0 || b > 1.0) throw ConfigError("beta outside [0,1]: " + schedule);
    return b;
  }
  throw ConfigError("unknown beta schedule: " + schedule);
}

inline void TrainConfig::beta_check() const {
  (void)beta_at(0, iters_step3, beta_schedule);
}

struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "runs/out";
  DatasetConfig dataset;
  PretrainConfig pretrain;
  Fraction scale{1, 4};
  NetworkConfig networks;
  LossConfig loss;
  bool wce_auto_weights = true;  // derive class weights from the train split
  WeightConfig weights;
  TrainConfig train;

  void validate() const {
    dataset.validate();
    networks.validate();
    loss.validate();
    weights.validate();
    train.validate();
    const bool known_scale =
        scale.num == 1 && (scale.den == 2 || scale.den == 4 || scale.den == 8);
    if (!known_scale) throw ConfigError("degradation.scale must be 1/2, 1/4 or 1/8");
    if (dataset.type == "synthetic" && dataset.size % scale.den != 0)
      throw ConfigError("dataset.size must be divisible by the scale denominator");
    if (train.patch % scale.den != 0)
      throw ConfigError("train.patch must be divisible by the scale denominator");
  }

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  /// Hash of the canonical (defaults-applied) config JSON. The output
  /// directory does not identify the experiment and is excluded.
  std::string hash() const {
    nlohmann::json j = to_json();
    j.erase("out_dir");
    return hex64(fnv1a64(j.dump()));
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown config key: " + scope + "." + key);
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key has wrong type: ") + key);
    }
  }
}

}  // namespace detail

inline nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["dataset"] = {{"type", dataset.type},
                  {"count", dataset.count},
                  {"size", dataset.size},
                  {"crack_free_frac", dataset.crack_free_frac},
                  {"train_count", dataset.train_count},
                  {"test_count", dataset.test_count}};
  if (!dataset.manifest.empty()) j["dataset"]["manifest"] = dataset.manifest;
  j["pretrain"] = {{"count", pretrain.count}, {"size", pretrain.size}};
  j["degradation"] = {{"scale", {scale.num, scale.den}}};
  j["networks"] = {{"in_channels", networks.in_channels},
                   {"sr_features", networks.sr_features},
                   {"sr_blocks", networks.sr_blocks},
                   {"seg_features", networks.seg_features},
                   {"kernel_embed", networks.kernel_embed},
                   {"blur_skip", networks.blur_skip}};
  j["loss"] = {{"loss", seg_loss_name(loss.seg_loss)},
               {"alpha", loss.alpha},
               {"gamma", loss.gamma},
               {"kernel_loss_weight", loss.kernel_loss_weight},
               {"gdice_eps", loss.gdice_eps},
               {"wce_clamp_eps", loss.wce_clamp_eps},
               {"beta_schedule", train.beta_schedule}};
  if (wce_auto_weights)
    j["loss"]["wce_class_weights"] = "auto";
  else
    j["loss"]["wce_class_weights"] = {loss.wce_class_weights[0], loss.wce_class_weights[1]};
  j["weights"] = {{"use_lc_weight", weights.use_lc_weight},
                  {"use_co_weight", weights.use_co_weight},
                  {"use_fo_weight", weights.use_fo_weight},
                  {"m_C", weights.m_c},
                  {"m_F", weights.m_f},
                  {"fo_target", weights.fo_target}};
  j["train"] = {{"iters_step1", train.iters_step1},
                {"iters_step2", train.iters_step2},
                {"iters_step3", train.iters_step3},
                {"batch_size", train.batch_size},
                {"lr_pretrain", train.lr_pretrain},
                {"lr_finetune", train.lr_finetune},
                {"adam", {train.adam_beta1, train.adam_beta2, train.adam_eps}},
                {"beta_schedule", train.beta_schedule},
                {"patch", train.patch},
                {"step3_mode", train.step3_mode},
                {"checkpoint_every", train.checkpoint_every}};
  return j;
}

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::require_keys(j, {"seed", "out_dir", "dataset", "pretrain", "degradation",
                           "networks", "loss", "weights", "train"},
                       "config");
  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "out_dir", c.out_dir);

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::require_keys(d, {"type", "count", "size", "crack_free_frac", "train_count",
                             "test_count", "manifest"},
                         "dataset");
    detail::maybe(d, "type", c.dataset.type);
    detail::maybe(d, "count", c.dataset.count);
    detail::maybe(d, "size", c.dataset.size);
    detail::maybe(d, "crack_free_frac", c.dataset.crack_free_frac);
    detail::maybe(d, "train_count", c.dataset.train_count);
    detail::maybe(d, "test_count", c.dataset.test_count);
    detail::maybe(d, "manifest", c.dataset.manifest);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    detail::require_keys(p, {"count", "size"}, "pretrain");
    detail::maybe(p, "count", c.pretrain.count);
    detail::maybe(p, "size", c.pretrain.size);
  }
  if (j.contains("degradation")) {
    const auto& d = j.at("degradation");
    detail::require_keys(d, {"scale"}, "degradation");
    if (d.contains("scale")) {
      const auto& s = d.at("scale");
      if (!s.is_array() || s.size() != 2) throw ConfigError("degradation.scale must be [num, den]");
      c.scale.num = s[0].get<int>();
      c.scale.den = s[1].get<int>();
    }
  }
  if (j.contains("networks")) {
    const auto& n = j.at("networks");
    detail::require_keys(n, {"in_channels", "sr_features", "sr_blocks", "seg_features",
                             "kernel_embed", "blur_skip"},
                         "networks");
    detail::maybe(n, "in_channels", c.networks.in_channels);
    detail::maybe(n, "sr_features", c.networks.sr_features);
    detail::maybe(n, "sr_blocks", c.networks.sr_blocks);
    detail::maybe(n, "seg_features", c.networks.seg_features);
    detail::maybe(n, "kernel_embed", c.networks.kernel_embed);
    detail::maybe(n, "blur_skip", c.networks.blur_skip);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::require_keys(l, {"loss", "alpha", "gamma", "kernel_loss_weight", "gdice_eps",
                             "wce_clamp_eps", "wce_class_weights", "beta", "beta_schedule"},
                         "loss");
    if (l.contains("loss")) c.loss.seg_loss = parse_seg_loss(l.at("loss").get<std::string>());
    detail::maybe(l, "alpha", c.loss.alpha);
    detail::maybe(l, "gamma", c.loss.gamma);
    detail::maybe(l, "kernel_loss_weight", c.loss.kernel_loss_weight);
    detail::maybe(l, "gdice_eps", c.loss.gdice_eps);
    detail::maybe(l, "wce_clamp_eps", c.loss.wce_clamp_eps);
    if (l.contains("wce_class_weights")) {
      const auto& w = l.at("wce_class_weights");
      if (w.is_string() && w.get<std::string>() == "auto") {
        c.wce_auto_weights = true;
      } else if (w.is_array() && w.size() == 2) {
        c.wce_auto_weights = false;
        c.loss.wce_class_weights = {w[0].get<double>(), w[1].get<double>()};
      } else {
        throw ConfigError("loss.wce_class_weights must be \"auto\" or [w_bg, w_crack]");
      }
    }
    if (l.contains("beta") && l.contains("beta_schedule"))
      throw ConfigError("give loss.beta or loss.beta_schedule, not both");
    if (l.contains("beta"))
      c.train.beta_schedule = "fixed:" + nlohmann::json(l.at("beta").get<double>()).dump();
    if (l.contains("beta_schedule")) {
      const auto& b = l.at("beta_schedule");
      c.train.beta_schedule = b.is_string() ? b.get<std::string>()
                                            : "fixed:" + nlohmann::json(b.get<double>()).dump();
    }
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    detail::require_keys(w, {"use_lc_weight", "use_co_weight", "use_fo_weight", "m_C", "m_F",
                             "fo_target"},
                         "weights");
    detail::maybe(w, "use_lc_weight", c.weights.use_lc_weight);
    detail::maybe(w, "use_co_weight", c.weights.use_co_weight);
    detail::maybe(w, "use_fo_weight", c.weights.use_fo_weight);
    detail::maybe(w, "m_C", c.weights.m_c);
    detail::maybe(w, "m_F", c.weights.m_f);
    detail::maybe(w, "fo_target", c.weights.fo_target);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::require_keys(t, {"iters_step1", "iters_step2", "iters_step3", "batch_size",
                             "lr_pretrain", "lr_finetune", "adam", "beta_schedule", "patch",
                             "step3_mode", "checkpoint_every"},
                         "train");
    detail::maybe(t, "iters_step1", c.train.iters_step1);
    detail::maybe(t, "iters_step2", c.train.iters_step2);
    detail::maybe(t, "iters_step3", c.train.iters_step3);
    detail::maybe(t, "batch_size", c.train.batch_size);
    detail::maybe(t, "lr_pretrain", c.train.lr_pretrain);
    detail::maybe(t, "lr_finetune", c.train.lr_finetune);
    if (t.contains("adam")) {
      const auto& a = t.at("adam");
      if (!a.is_array() || a.size() != 3) throw ConfigError("train.adam must be [b1, b2, eps]");
      c.train.adam_beta1 = a[0].get<double>();
      c.train.adam_beta2 = a[1].get<double>();
      c.train.adam_eps = a[2].get<double>();
    }
    detail::maybe(t, "beta_schedule", c.train.beta_schedule);
    detail::maybe(t, "patch", c.train.patch);
    detail::maybe(t, "step3_mode", c.train.step3_mode);
    detail::maybe(t, "checkpoint_every", c.train.checkpoint_every);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return RunConfig::from_json(j);
}

}  // namespace srseg
