#include <gtest/gtest.h>

#include "disent/run_config.hpp"

using namespace disent;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    resolve_run_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST(RunConfig, EmptyObjectMaterializesEveryDefault) {
  auto cfg = resolve_run_config("{}");
  EXPECT_EQ(cfg, default_run_config());
  for (const char* section : {"data", "identity", "metric", "flf", "probe", "equilibrium", "costs", "gradcheck"})
    EXPECT_TRUE(cfg.contains(section)) << section;
}

TEST(RunConfig, OverridesApply) {
  auto cfg = resolve_run_config(R"({"seed": 9, "flf": {"alpha_max": 0, "iters": 10}, "metric": {"loss": "ccl"}})");
  EXPECT_EQ(config_seed(cfg), 9u);
  auto f = flf_config(cfg, 16, 5, 2);
  EXPECT_EQ(f.schedule.alpha_max, 0.0);
  EXPECT_EQ(flf_run_config(cfg).iters, 10);
  EXPECT_EQ(metric_config(cfg).loss, MetricLoss::kCoupledClusters);
  EXPECT_EQ(cfg["flf"]["dim_d"], 8u);
}

TEST(RunConfig, UnknownKeysRejectedWithLine) {
  EXPECT_EQ(error_line("{\n  \"flf\": {\n    \"alpha\": 1\n  }\n}"), 3u);
  EXPECT_EQ(error_line("{\n\n  \"model\": {}\n}"), 3u);
}

TEST(RunConfig, TypeMismatchRejectedWithLine) {
  EXPECT_EQ(error_line("{\n \"metric\": {\n  \"iters\": -5\n }\n}"), 3u);
  EXPECT_EQ(error_line("{\"metric\": {\"mining\": 1}}"), 1u);
  EXPECT_EQ(error_line("{\n \"data\": {\"kind\": \"faces\"}\n}"), 2u);
}

TEST(RunConfig, SyntaxErrorReportsLine) {
  EXPECT_EQ(error_line("{\n  \"seed\": 3,\n  \"flf\": {\"iters\": }\n}"), 3u);
  try {
    resolve_run_config("{\n  \"seed\": 3,\n  \"flf\": {\"iters\": }\n}");
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("config line 3:", 0), 0u) << e.what();
  }
}

TEST(RunConfig, RangeChecks) {
  EXPECT_NE(error_line(R"({"data": {"test_fraction": 1.0}})"), static_cast<std::size_t>(-1));
  EXPECT_NE(error_line(R"({"flf": {"ramp_iters": 0}})"), static_cast<std::size_t>(-1));
  EXPECT_NE(error_line(R"({"flf": {"log_every": 0}})"), static_cast<std::size_t>(-1));
}

TEST(RunConfig, TrainCountHoldsOutTestFraction) {
  auto cfg = default_run_config();
  EXPECT_EQ(factor_sample_count(cfg), 4000u);
  EXPECT_EQ(factor_train_count(cfg), 3000u);
}
