#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("disent_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string(DISENT_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  auto p = dir / "config.in.json";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, CostsPrintsClosedForms) {
  auto dir = scratch("costs");
  auto r = run("costs --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("passes=12 distances=288"), std::string::npos) << r.output;
  auto report = nlohmann::json::parse(slurp(dir / "out" / "costs.json"));
  EXPECT_EQ(report[0]["distance_calculations"], 288);
  EXPECT_TRUE(fs::exists(dir / "out" / "config.json"));
}

TEST(Cli, BadConfigExitsTwoWithLine) {
  auto dir = scratch("badcfg");
  auto cfg = write_config(dir, "{\n  \"flf\": {\n    \"nope\": 1\n  }\n}\n");
  auto r = run("train-flf --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
  EXPECT_EQ(run("costs --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string(), dir).code, 2);
  EXPECT_EQ(run("costs", dir).code, 2);
}

TEST(Cli, MiningFailureExitsFour) {
  auto dir = scratch("mining");
  auto cfg = write_config(dir, R"({"identity": {"num_subjects": 4}, "metric": {"M": 500, "iters": 2}})");
  auto r = run("train-metric --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
}

TEST(Cli, DivergenceExitsThreeAndKeepsArtifacts) {
  auto dir = scratch("diverge");
  auto cfg = write_config(dir, R"({"metric": {"lr": 1e12, "momentum": 0.99, "weight_decay": 0.0, "iters": 200, "log_every": 1}})");
  auto r = run("train-metric --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "config.json"));
}

TEST(Cli, GradcheckPasses) {
  auto dir = scratch("gradcheck");
  auto r = run("gradcheck --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "gradcheck.csv"));
}

TEST(Cli, EquilibriumWritesSweep) {
  auto dir = scratch("equilibrium");
  auto cfg = write_config(dir, R"({"equilibrium": {"scenario": "dependent", "alphas": [0.1, 10]}})");
  auto r = run("equilibrium --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("alpha-dependent"), std::string::npos);
  EXPECT_EQ(slurp(dir / "out" / "sweep.csv").substr(0, 45), "alpha,best_objective,encoder_id,argmin_stable");
}

TEST(Cli, PipelineIsByteIdenticalAcrossRuns) {
  auto dir = scratch("pipeline");
  auto cfg = write_config(dir, R"({"data": {"n": 400}, "flf": {"iters": 120, "log_every": 20}, "probe": {"iters": 200}})");
  std::string outputs[2];
  std::string checkpoints[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = (dir / ("run" + std::to_string(i))).string();
    ASSERT_EQ(run("gen-data --config " + cfg.string() + " --seed 7 --out " + out, dir).code, 0);
    ASSERT_EQ(run("train-flf --config " + cfg.string() + " --seed 7 --out " + out, dir).code, 0);
    auto p = run("probe --config " + cfg.string() + " --seed 7 --out " + out, dir);
    ASSERT_EQ(p.code, 0) << p.output;
    outputs[i] = slurp(fs::path(out) / "metrics.csv") + slurp(fs::path(out) / "probe_report.json") +
                 slurp(fs::path(out) / "embeddings.csv") + slurp(fs::path(out) / "dataset.csv");
    checkpoints[i] = slurp(fs::path(out) / "checkpoint.json");
  }
  EXPECT_FALSE(outputs[0].empty());
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(checkpoints[0], checkpoints[1]);
  auto resolved = nlohmann::json::parse(slurp(dir / "run0" / "config.json"));
  EXPECT_EQ(resolved["seed"], 7);
  EXPECT_EQ(resolved["flf"]["dim_d"], 8);
}

TEST(Cli, TrainMetricWritesReport) {
  auto dir = scratch("metric");
  auto cfg = write_config(dir, R"({"metric": {"iters": 20, "log_every": 5}})");
  auto r = run("train-metric --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
  ASSERT_EQ(r.code, 0) << r.output;
  auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_TRUE(report.contains("learned_1nn_accuracy"));
  auto csv = slurp(dir / "out" / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,loss,mean_kept_positives,input_passes,distance_calculations");
  EXPECT_NE(csv.find(",12,288\n"), std::string::npos);
}
