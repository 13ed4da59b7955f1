// disent: command-line front end for data generation, training, probing and checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "disent/checkpoint.hpp"
#include "disent/csv.hpp"
#include "disent/equilibrium.hpp"
#include "disent/errors.hpp"
#include "disent/flf.hpp"
#include "disent/gradcheck_suite.hpp"
#include "disent/metric_training.hpp"
#include "disent/mining.hpp"
#include "disent/probe.hpp"
#include "disent/run_config.hpp"
#include "disent/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace disent;

namespace {

enum Exit { kOk = 0, kFailed = 1, kBadConfig = 2, kDiverged = 3, kMiningFailed = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

ordered_json resolve(const Options& opt) {
  ordered_json cfg = default_run_config();
  if (!opt.config.empty()) {
    try {
      cfg = load_run_config(opt.config);
    } catch (const IoError& e) {
      throw ConfigError(0, e.what());
    }
  }
  if (opt.seed) cfg["seed"] = *opt.seed;
  fs::create_directories(opt.out);
  write_text(fs::path(opt.out) / "config.json", cfg.dump(2) + "\n");
  return cfg;
}

std::vector<int> all_labels(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(s.class_y);
  return out;
}

Dataset factor_dataset(const ordered_json& cfg) {
  return gen_factor_dataset(factor_spec(cfg), factor_sample_count(cfg), config_seed(cfg));
}

ProbeSplit factor_split(const ordered_json& cfg) {
  ProbeSplit split;
  const auto train = factor_train_count(cfg);
  for (std::size_t i = 0; i < factor_sample_count(cfg); ++i) (i < train ? split.train : split.test).push_back(i);
  return split;
}

int cmd_gen_data(const Options& opt) {
  const auto cfg = resolve(opt);
  const Dataset ds = cfg["data"]["kind"] == "identity"
                         ? gen_identity_expression_dataset(identity_spec(cfg), config_seed(cfg))
                         : factor_dataset(cfg);
  write_dataset_csv(ds, fs::path(opt.out) / "dataset.csv");
  std::printf("wrote %zu samples to %s\n", ds.size(), (fs::path(opt.out) / "dataset.csv").c_str());
  return kOk;
}

int cmd_train_metric(const Options& opt) {
  const auto cfg = resolve(opt);
  const auto seed = config_seed(cfg);
  const Dataset ds = gen_identity_expression_dataset(identity_spec(cfg), seed);
  const auto folds = subject_independent_split(ds, cfg["identity"]["folds"].get<std::size_t>(), seed);
  const auto test_fold = cfg["identity"]["test_fold"].get<std::size_t>();
  if (test_fold >= folds.size()) throw std::invalid_argument("identity.test_fold out of range");
  std::vector<std::size_t> train_idx;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != test_fold) train_idx.insert(train_idx.end(), folds[f].begin(), folds[f].end());
  }
  const Dataset train = subset(ds, train_idx);
  const Dataset test = subset(ds, folds[test_fold]);

  MetricTrainer trainer(train, metric_config(cfg));
  const auto iters = cfg["metric"]["iters"].get<std::size_t>();
  const auto log_every = cfg["metric"]["log_every"].get<std::size_t>();
  if (log_every == 0) throw std::invalid_argument("metric.log_every must be positive");

  const fs::path metrics_path = fs::path(opt.out) / "metrics.csv";
  std::string csv = "iter,loss,mean_kept_positives,input_passes,distance_calculations\n";
  const auto flush = [&] { write_text(metrics_path, csv); };
  try {
    for (std::size_t it = 0; it < iters; ++it) {
      const auto s = trainer.step();
      if (it % log_every == 0 || it + 1 == iters) {
        csv += std::to_string(it) + ',' + format_double(s.loss) + ',' + format_double(s.mean_kept_positives) +
               ',' + std::to_string(s.cost.input_passes) + ',' + std::to_string(s.cost.distance_calculations) + '\n';
      }
    }
  } catch (...) {
    flush();
    throw;
  }
  flush();
  save_checkpoint(trainer.params(), fs::path(opt.out) / "checkpoint.json");

  const auto raw = one_nn_accuracy(train.features(), all_labels(train), test.features(), all_labels(test));
  const auto learned = one_nn_accuracy(trainer.embed(train.features()), all_labels(train),
                                       trainer.embed(test.features()), all_labels(test));
  ordered_json report = {{"loss", to_string(trainer.config().loss)},
                         {"iters", iters},
                         {"raw_1nn_accuracy", raw},
                         {"learned_1nn_accuracy", learned}};
  write_text(fs::path(opt.out) / "report.json", report.dump(2) + "\n");
  std::printf("1-NN accuracy: raw %.4f, learned %.4f\n", raw, learned);
  return kOk;
}

int cmd_train_flf(const Options& opt) {
  const auto cfg = resolve(opt);
  const Dataset ds = factor_dataset(cfg);
  const auto split = factor_split(cfg);
  const Dataset train = subset(ds, split.train);
  FLFTrainer trainer(train, flf_config(cfg, ds.feature_dim, ds.num_classes, ds.num_attrs),
                     flf_run_config(cfg), config_seed(cfg));
  const auto run = flf_run_config(cfg);
  std::vector<FLFStepMetrics> rows;
  const fs::path metrics_path = fs::path(opt.out) / "metrics.csv";
  try {
    while (trainer.iter() < run.iters) {
      auto m = trainer.step();
      if (m.iter % run.log_every == 0 || trainer.iter() == run.iters) rows.push_back(m);
    }
  } catch (...) {
    write_flf_metrics_csv(metrics_path, rows);
    throw;
  }
  write_flf_metrics_csv(metrics_path, rows);
  save_checkpoint(trainer.model().params(), fs::path(opt.out) / "checkpoint.json");
  if (!rows.empty()) {
    const auto& m = rows.back();
    std::printf("iter %lld: loss_cd %.4f loss_dis %.4f loss_cl %.4f loss_rec %.4f alpha_adv %.3f\n",
                static_cast<long long>(m.iter), m.loss_cd, m.loss_dis, m.loss_cl, m.loss_rec, m.alpha_adv);
  }
  return kOk;
}

int cmd_probe(const Options& opt) {
  const auto cfg = resolve(opt);
  const Dataset ds = factor_dataset(cfg);
  auto ckpt = cfg["probe"]["checkpoint"].get<std::string>();
  if (ckpt.empty()) ckpt = (fs::path(opt.out) / "checkpoint.json").string();
  FLFModel model(flf_config(cfg, ds.feature_dim, ds.num_classes, ds.num_attrs), config_seed(cfg));
  ParamStore loaded = load_checkpoint(ckpt);
  for (const auto& [name, value] : model.params()) {
    auto it = loaded.find(name);
    if (it == loaded.end() || !it->second.same_shape(value)) {
      throw std::invalid_argument("checkpoint " + ckpt + " does not match the flf config at '" + name + "'");
    }
  }
  if (loaded.size() != model.params().size()) {
    throw std::invalid_argument("checkpoint " + ckpt + " has parameters the flf config does not");
  }
  model.params() = std::move(loaded);

  const auto report = probe_accuracy_matrix(model, ds, factor_split(cfg), probe_config(cfg));
  write_text(fs::path(opt.out) / "probe_report.json", report.to_json() + "\n");
  write_text(fs::path(opt.out) / "probe.csv",
             "target,accuracy,chance\n"
             "y_given_d," + format_double(report.acc_y_given_d) + ',' + format_double(report.chance_y) + "\n"
             "s_given_d," + format_double(report.acc_s_given_d) + ',' + format_double(report.chance_s) + "\n"
             "y_given_l," + format_double(report.acc_y_given_l) + ',' + format_double(report.chance_y) + "\n"
             "s_given_l," + format_double(report.acc_s_given_l) + ',' + format_double(report.chance_s) + "\n");
  dump_embeddings(model, ds, fs::path(opt.out) / "embeddings.csv");
  std::printf("(y|d) %.4f  (s|d) %.4f  (y|l) %.4f  (s|l) %.4f  chance y %.4f s %.4f\n", report.acc_y_given_d,
              report.acc_s_given_d, report.acc_y_given_l, report.acc_s_given_l, report.chance_y, report.chance_s);
  return kOk;
}

int cmd_gradcheck(const Options& opt) {
  const auto cfg = resolve(opt);
  const auto report = run_gradcheck_suite(config_seed(cfg), cfg["gradcheck"]["points"].get<std::size_t>(),
                                          cfg["gradcheck"]["tolerance"].get<double>());
  std::string csv = "check,points,rejected,max_rel_error,passed\n";
  for (const auto& e : report.entries) {
    std::printf("%-40s %s  max rel error %.3e\n", e.name.c_str(), e.passed ? "ok  " : "FAIL", e.max_rel_error);
    csv += e.name + ',' + std::to_string(e.points) + ',' + std::to_string(e.rejected) + ',' +
           format_double(e.max_rel_error) + ',' + (e.passed ? "1" : "0") + '\n';
  }
  write_text(fs::path(opt.out) / "gradcheck.csv", csv);
  std::printf("max relative error %.3e (tolerance %.1e): %s\n", report.max_rel_error, report.tolerance,
              report.passed ? "PASS" : "FAIL");
  return report.passed ? kOk : kFailed;
}

DiscreteJoint scenario_joint(const ordered_json& eq) {
  const auto scenario = eq["scenario"].get<std::string>();
  if (scenario == "independent" || scenario == "dependent") {
    // x enumerates the four (s, y) pairs; s = y removes the off-diagonal pairs.
    DiscreteJoint q(4, 2, 2);
    for (std::size_t x = 0; x < 4; ++x) {
      const std::size_t s = x & 1, y = x >> 1;
      if (scenario == "independent") q.at(x, s, y) = 0.25;
    }
    if (scenario == "dependent") {
      q.at(0, 0, 0) = 0.25;
      q.at(1, 0, 0) = 0.25;
      q.at(2, 1, 1) = 0.25;
      q.at(3, 1, 1) = 0.25;
    }
    return q;
  }
  if (scenario == "custom") {
    return DiscreteJoint(eq["nx"].get<std::size_t>(), eq["ns"].get<std::size_t>(), eq["ny"].get<std::size_t>(),
                         eq["table"].get<std::vector<double>>());
  }
  throw std::invalid_argument("equilibrium.scenario must be independent, dependent or custom");
}

int cmd_equilibrium(const Options& opt) {
  const auto cfg = resolve(opt);
  const auto& eq = cfg["equilibrium"];
  const auto report = scenario_sweep(scenario_joint(eq), eq["nd"].get<std::size_t>(),
                                     eq["alphas"].get<std::vector<double>>(), eq["budget"].get<std::uint64_t>());
  write_sweep_csv(fs::path(opt.out) / "sweep.csv", report);
  for (const auto& r : report.rows) {
    std::printf("alpha %-8g best %.6f encoder %llu argmin-size %zu stable %d\n", r.alpha, r.best_objective,
                static_cast<unsigned long long>(r.encoder_id), r.argmin.size(), r.stable ? 1 : 0);
  }
  std::printf("argmin set is %s\n", report.alpha_independent ? "alpha-independent" : "alpha-dependent");
  return kOk;
}

int cmd_costs(const Options& opt) {
  const auto cfg = resolve(opt);
  const auto X = cfg["costs"]["X"].get<std::int64_t>();
  const auto N = cfg["costs"]["N"].get<std::int64_t>();
  const auto M = cfg["costs"]["M"].get<std::int64_t>();
  ordered_json out = ordered_json::array();
  for (auto method : {CostMethod::kTupleClusters, CostMethod::kTriplet, CostMethod::kNPlusOneTuplet}) {
    const auto r = cost_report(X, N, M, method);
    std::printf("method=%s passes=%lld distances=%lld\n", to_string(method).c_str(),
                static_cast<long long>(r.input_passes), static_cast<long long>(r.distance_calculations));
    out.push_back({{"method", to_string(method)}, {"X", X}, {"N", N}, {"M", M},
                   {"input_passes", r.input_passes}, {"distance_calculations", r.distance_calculations}});
  }
  write_text(fs::path(opt.out) / "costs.json", out.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled representation learning toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands;
  const auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON run config (defaults when omitted)");
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", opt.seed, "overrides the config seed");
    commands.emplace_back(sub, fn);
  };
  add("gen-data", "write a synthetic dataset CSV", cmd_gen_data);
  add("train-metric", "train an embedding with a metric loss", cmd_train_metric);
  add("train-flf", "train the six-network decomposition", cmd_train_flf);
  add("probe", "logistic-regression probes on a trained decomposition", cmd_probe);
  add("gradcheck", "finite-difference gradient suite", cmd_gradcheck);
  add("equilibrium", "exhaustive encoder sweep on a discrete toy", cmd_equilibrium);
  add("costs", "per-batch input passes and distance computations", cmd_costs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) return fn(opt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return kBadConfig;
  } catch (const TrainingError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const NumericError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const MiningError& e) {
    std::cerr << "error: mining failed: " << e.what() << '\n';
    return kMiningFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kFailed;
}
