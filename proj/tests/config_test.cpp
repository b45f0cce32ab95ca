#include "srseg/config.hpp"

#include <gtest/gtest.h>

namespace srseg {
namespace {

TEST(RunConfig, JsonRoundTripPreservesEverything) {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.out_dir = "runs/x";
  cfg.dataset.count = 100;
  cfg.networks.blur_skip = true;
  cfg.loss.alpha = 0.25;
  cfg.loss.seg_loss = SegLossKind::kGbc;
  cfg.weights.use_co_weight = true;
  cfg.weights.m_c = 2.0;
  cfg.train.beta_schedule = "increasing";
  cfg.train.batch_size = 3;

  const RunConfig back = RunConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json().dump(), cfg.to_json().dump());
  EXPECT_EQ(back.hash(), cfg.hash());
}

TEST(RunConfig, HashIsSensitiveToChanges) {
  RunConfig a, b;
  b.loss.alpha = 0.25;
  EXPECT_NE(a.hash(), b.hash());
  RunConfig c;
  EXPECT_EQ(a.hash(), c.hash());
}

TEST(RunConfig, RejectsUnknownKeys) {
  nlohmann::json j{{"seeed", 1}};
  EXPECT_THROW(RunConfig::from_json(j), ConfigError);
  nlohmann::json j2{{"loss", {{"alpa", 0.5}}}};
  EXPECT_THROW(RunConfig::from_json(j2), ConfigError);
}

TEST(RunConfig, RejectsOutOfRangeValues) {
  nlohmann::json j{{"loss", {{"alpha", 1.5}}}};
  EXPECT_THROW(RunConfig::from_json(j), ConfigError);
  nlohmann::json j2{{"degradation", {{"scale", {1, 3}}}}};
  EXPECT_THROW(RunConfig::from_json(j2), ConfigError);
  nlohmann::json j3{{"train", {{"batch_size", 0}}}};
  EXPECT_THROW(RunConfig::from_json(j3), ConfigError);
}

TEST(RunConfig, BetaAndScheduleAreExclusive) {
  nlohmann::json j{{"loss", {{"beta", 0.3}, {"beta_schedule", "increasing"}}}};
  EXPECT_THROW(RunConfig::from_json(j), ConfigError);

  nlohmann::json j2{{"loss", {{"beta", 0.3}}}};
  const RunConfig cfg = RunConfig::from_json(j2);
  EXPECT_EQ(cfg.train.beta_schedule, "fixed:0.3");
}

TEST(RunConfig, WceWeightsAutoOrExplicit) {
  nlohmann::json j{{"loss", {{"wce_class_weights", "auto"}}}};
  EXPECT_TRUE(RunConfig::from_json(j).wce_auto_weights);

  nlohmann::json j2{{"loss", {{"wce_class_weights", {1.0, 25.0}}}}};
  const RunConfig cfg = RunConfig::from_json(j2);
  EXPECT_FALSE(cfg.wce_auto_weights);
  EXPECT_DOUBLE_EQ(cfg.loss.wce_class_weights[1], 25.0);

  nlohmann::json j3{{"loss", {{"wce_class_weights", "uniform"}}}};
  EXPECT_THROW(RunConfig::from_json(j3), ConfigError);
}

TEST(RunConfig, DefaultsMatchStatedTrainingSettings) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.train.iters_step1, 200000);
  EXPECT_EQ(cfg.train.iters_step2, 30000);
  EXPECT_EQ(cfg.train.iters_step3, 150000);
  EXPECT_EQ(cfg.train.batch_size, 6);
  EXPECT_DOUBLE_EQ(cfg.train.lr_pretrain, 2e-4);
  EXPECT_DOUBLE_EQ(cfg.train.lr_finetune, 2e-5);
  EXPECT_DOUBLE_EQ(cfg.train.adam_beta1, 0.9);
  EXPECT_DOUBLE_EQ(cfg.train.adam_beta2, 0.999);
  EXPECT_DOUBLE_EQ(cfg.train.adam_eps, 1e-8);
  EXPECT_DOUBLE_EQ(cfg.loss.alpha, 0.5);
  EXPECT_DOUBLE_EQ(cfg.loss.gamma, 0.5);
  EXPECT_EQ(cfg.scale.den, 4);
}

}  // namespace
}  // namespace srseg
