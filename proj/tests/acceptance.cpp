// Acceptance run: one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "disent/equilibrium.hpp"
#include "disent/flf.hpp"
#include "disent/gradcheck_suite.hpp"
#include "disent/metric_losses.hpp"
#include "disent/metric_training.hpp"
#include "disent/mining.hpp"
#include "disent/probe.hpp"
#include "disent/run_config.hpp"
#include "disent/synthdata.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace disent;
using nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> out;
  for (const auto& s : ds.samples) out.push_back(s.class_y);
  return out;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto rep = run_gradcheck_suite(0, 10, 1e-5);
  const double secs = seconds_since(t0);
  return {rep.passed && secs <= 60.0,
          fmt("%zu checks, max rel error %.2e, %.1fs", rep.entries.size(), rep.max_rel_error, secs)};
}

Outcome loss_geometry() {
  std::mt19937_64 rng(101);
  std::size_t mismatches = 0, zeros = 0;
  for (int t = 0; t < 1000; ++t) {
    auto inst = oracle::random_tuple_instance(rng);
    const double loss = tuple_clusters_loss(inst.positives, inst.negatives, inst.threshold, inst.metric);
    const bool zero = loss == 0.0;
    zeros += zero;
    mismatches += zero != oracle::tuple_zero_conditions(inst);
  }
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto inst = oracle::random_adaptive_instance(rng);
    worst = std::max(worst, std::abs(adaptive_tuple_clusters_loss(inst.positives, inst.negatives, inst.params) -
                                     oracle::adaptive_loss_raw(inst)));
  }
  return {mismatches == 0 && worst <= 1e-9,
          fmt("zero-iff mismatches %zu/1000 (%zu zero), adaptive max abs diff %.2e", mismatches, zeros, worst)};
}

Outcome factorization() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    auto inst = oracle::random_factorization_instance(rng);
    const double h = combined_quadratic_h(inst.f1, inst.f2, inst.params);
    const double rhs = reference_distance(inst.f1, inst.f2, inst.A_tilde, inst.B_tilde, inst.params.c.storage(),
                                          inst.params.b.item()) -
                       mahalanobis_distance(inst.f1, inst.f2, MahalanobisMetric(inst.M));
    worst = std::max(worst, std::abs(h - rhs));
  }
  return {worst <= 1e-9, fmt("max |H - (T - D)| %.2e over 500 draws", worst)};
}

Outcome cost_accounting() {
  IdentityExpressionSpec spec;
  const Dataset ds = gen_identity_expression_dataset(spec, 1);
  MetricTrainConfig cfg;
  cfg.X = 12;
  cfg.N = 6;
  cfg.M = 6;
  MetricTrainer trainer(ds, cfg);
  const auto s = trainer.step();
  const SampleIndex index(ds);
  std::vector<std::size_t> queries;
  for (std::size_t q = 0; q < 12; ++q) queries.push_back(q * (ds.size() / 12));
  std::mt19937_64 rng(1);
  const auto batches = assemble_tuplet_indices(index, queries, 6, 6, rng);
  std::size_t inputs = 0;
  for (const auto& b : batches) inputs += b.negatives.size() + b.positives.size();
  const bool ok = s.cost.input_passes == 12 && s.cost.distance_calculations == 288 && inputs == 144;
  return {ok, fmt("passes %lld, distances %lld, batch inputs %zu", static_cast<long long>(s.cost.input_passes),
                  static_cast<long long>(s.cost.distance_calculations), inputs)};
}

Outcome mining_oracle() {
  std::mt19937_64 rng(303);
  std::size_t mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    auto inst = oracle::random_mining_instance(rng);
    mismatches += mine_positives(inst.positives, inst.negatives, inst.metric).kept_positive_indices !=
                  oracle::mine_raw(inst);
  }
  return {mismatches == 0, fmt("%zu/1000 index mismatches", mismatches)};
}

Outcome metric_efficacy() {
  const auto t0 = Clock::now();
  double raw = 0, learned = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ordered_json cfg = default_run_config();
    cfg["seed"] = seed;
    const Dataset ds = gen_identity_expression_dataset(identity_spec(cfg), seed);
    const auto folds = subject_independent_split(ds, cfg["identity"]["folds"].get<std::size_t>(), seed);
    const auto test_fold = cfg["identity"]["test_fold"].get<std::size_t>();
    std::vector<std::size_t> train_idx;
    for (std::size_t f = 0; f < folds.size(); ++f)
      if (f != test_fold) train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());
    const Dataset train = subset(ds, train_idx), test = subset(ds, folds[test_fold]);
    MetricTrainer trainer(train, metric_config(cfg));
    for (std::size_t it = 0; it < cfg["metric"]["iters"].get<std::size_t>(); ++it) trainer.step();
    const double r = one_nn_accuracy(train.features(), labels_of(train), test.features(), labels_of(test));
    const double l = one_nn_accuracy(trainer.embed(train.features()), labels_of(train),
                                     trainer.embed(test.features()), labels_of(test));
    raw += r / 3;
    learned += l / 3;
    per_seed += fmt(" [seed %llu raw %.3f learned %.3f]", static_cast<unsigned long long>(seed), r, l);
  }
  const double secs = seconds_since(t0);
  return {learned >= 0.90 && raw <= 0.70 && secs <= 300.0,
          fmt("mean learned %.3f, raw %.3f, %.0fs;", learned, raw, secs) + per_seed};
}

ProbeReport flf_run(std::uint64_t seed, double alpha_max) {
  ordered_json cfg = default_run_config();
  cfg["seed"] = seed;
  cfg["flf"]["alpha_max"] = alpha_max;
  const Dataset ds = gen_factor_dataset(factor_spec(cfg), factor_sample_count(cfg), seed);
  ProbeSplit split;
  for (std::size_t i = 0; i < ds.size(); ++i) (i < factor_train_count(cfg) ? split.train : split.test).push_back(i);
  const Dataset train = subset(ds, split.train);
  FLFTrainer trainer(train, flf_config(cfg, ds.feature_dim, ds.num_classes, ds.num_attrs),
                     flf_run_config(cfg), seed);
  trainer.run();
  return probe_accuracy_matrix(trainer.model(), ds, split, probe_config(cfg));
}

Outcome flf_dispelling() {
  const auto t0 = Clock::now();
  const auto cfg = default_run_config();
  const bool setup = cfg["data"]["dependency_rho"] == 0.0 && cfg["data"]["num_classes"] == 5 &&
                     cfg["data"]["num_attrs"] == 2 &&
                     cfg["data"]["n"] == 4000 && cfg["flf"]["dim_d"] == 8 && cfg["flf"]["ramp_iters"] == 5000 &&
                     cfg["flf"]["iters"] == 20000 && cfg["flf"]["alpha_max"] == 0.5;
  double sd = 0, sd0 = 0, yd = 0, yd0 = 0, chance = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto adv = flf_run(seed, 0.5);
    const auto abl = flf_run(seed, 0.0);
    sd += adv.acc_s_given_d / 3;
    yd += adv.acc_y_given_d / 3;
    sd0 += abl.acc_s_given_d / 3;
    yd0 += abl.acc_y_given_d / 3;
    chance += adv.chance_s / 3;
    per_seed += fmt(" [seed %llu s|d %.3f vs %.3f, y|d %.3f vs %.3f]", static_cast<unsigned long long>(seed),
                    adv.acc_s_given_d, abl.acc_s_given_d, adv.acc_y_given_d, abl.acc_y_given_d);
  }
  const double secs = seconds_since(t0);
  const bool ok = setup && sd <= chance + 0.10 && sd0 >= chance + 0.20 && yd >= 0.95 * yd0 && secs <= 600.0;
  return {ok, fmt("s|d %.3f (ablation %.3f, chance %.3f), y|d %.3f (ablation %.3f), %.0fs;", sd, sd0, chance, yd,
                  yd0, secs) +
                  per_seed};
}

Outcome responder_claim() {
  std::mt19937_64 rng(404);
  double worst_tv = 0, worst_grid = 0;
  for (int t = 0; t < 12; ++t) {
    const std::size_t nx = 2 + t % 3, ny = 2 + t % 2, nd = 1 + t % nx;
    auto q = oracle::random_joint(nx, 2, ny, rng);
    // Frozen deterministic encoder hitting every code.
    std::vector<std::size_t> enc(nx);
    for (std::size_t x = 0; x < nx; ++x) enc[x] = x < nd ? x : rng() % nd;
    const auto qt = induced_joint(q, enc, nd);
    const auto exact = optimal_responders(qt);
    const auto fit = fit_responders_by_descent(qt, {.seed = static_cast<std::uint64_t>(t)});
    worst_tv = std::max({worst_tv, max_row_tv(exact.y, fit.y), max_row_tv(exact.s, fit.s)});
    worst_grid = std::max({worst_grid, std::abs(expected_loss_y(qt, exact.y) - oracle::grid_min_expected_loss(qt, false)),
                           std::abs(expected_loss_s(qt, exact.s) - oracle::grid_min_expected_loss(qt, true))});
  }
  return {worst_tv <= 0.05 && worst_grid <= 1e-6,
          fmt("max TV %.2e over 12 toys, max |exact - grid| %.2e", worst_tv, worst_grid)};
}

DiscreteJoint two_bit(bool tied) {
  DiscreteJoint q(4, 2, 2);
  for (std::size_t x = 0; x < 4; ++x) {
    const std::size_t s = x & 1, y = x >> 1;
    if (!tied) q.at(x, s, y) = 0.25;
  }
  if (tied) {
    q.at(0, 0, 0) = q.at(1, 0, 0) = 0.25;
    q.at(2, 1, 1) = q.at(3, 1, 1) = 0.25;
  }
  return q;
}

Outcome equilibrium_scenarios() {
  const auto t0 = Clock::now();
  const std::vector<double> alphas{0.1, 0.5, 0.9, 2.0, 10.0};
  const auto indep = scenario_sweep(two_bit(false), 2, alphas);
  const auto tied = scenario_sweep(two_bit(true), 2, alphas);
  const double secs = seconds_since(t0);
  return {indep.alpha_independent && !tied.alpha_independent && secs <= 60.0,
          fmt("s independent of y: %s; s = y: %s; %.2fs",
              indep.alpha_independent ? "alpha-independent" : "alpha-dependent",
              tied.alpha_independent ? "alpha-independent" : "alpha-dependent", secs)};
}

Outcome schedule() {
  TrainSchedule s;
  s.ramp_iters = 5000;
  s.alpha_max = 0.5;
  const double a0 = alpha_schedule(0, s), a1 = alpha_schedule(5000, s), a2 = alpha_schedule(20000, s);
  return {a0 == 0.0 && a1 == 0.5 && a2 == 0.5, fmt("alpha(0)=%g alpha(5000)=%g alpha(20000)=%g", a0, a1, a2)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DISENT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "disent_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << R"({"seed": 11, "flf": {"iters": 400, "log_every": 50}, "metric": {"iters": 60, "log_every": 10}})";
  std::vector<std::string> runs;
  bool ok = true;
  for (int r = 0; r < 2; ++r) {
    const auto out = (dir / ("run" + std::to_string(r))).string();
    const auto common = " --config " + cfg.string() + " --out ";
    ok = ok && cli("train-flf" + common + out + "/flf") == 0 && cli("probe" + common + out + "/flf") == 0 &&
         cli("train-metric" + common + out + "/metric") == 0;
    std::string blob;
    for (const char* f : {"flf/metrics.csv", "flf/checkpoint.json", "flf/probe.csv", "metric/metrics.csv",
                          "metric/checkpoint.json"}) {
      const auto text = slurp(fs::path(out) / f);
      ok = ok && !text.empty();
      blob += text + '\0';
    }
    runs.push_back(blob);
  }
  ok = ok && runs[0] == runs[1];
  fs::remove_all(dir);
  return {ok, fmt("two CLI runs, %zu bytes of metrics and checkpoints %s", runs[0].size(),
                  runs[0] == runs[1] ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"loss geometry oracle", loss_geometry},
      {"factorization consistency", factorization},
      {"cost accounting", cost_accounting},
      {"mining oracle", mining_oracle},
      {"metric-learning efficacy", metric_efficacy},
      {"FLF dispelling", flf_dispelling},
      {"responder convergence", responder_claim},
      {"equilibrium scenarios", equilibrium_scenarios},
      {"schedule", schedule},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
