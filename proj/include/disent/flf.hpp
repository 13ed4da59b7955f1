#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "disent/embeddings.hpp"
#include "disent/graph.hpp"
#include "disent/optim.hpp"
#include "disent/synthdata.hpp"

namespace disent {

struct TrainSchedule {
  double alpha_max = 0.5;
  std::int64_t ramp_iters = 5000;
  double beta = 0.1;    // reconstruction weight for E_d
  double lambda = 0.5;  // reconstruction weight for E_l
};

/// alpha_max * min(1, iter / ramp_iters).
double alpha_schedule(std::int64_t iter, const TrainSchedule& schedule);

struct FLFConfig {
  std::size_t input_dim = 16;
  std::size_t num_classes = 5;
  std::size_t num_attrs = 2;
  std::size_t dim_d = 8;
  std::size_t dim_l = 4;
  std::size_t hidden = 16;
  double slope = 0.2;
  TrainSchedule schedule{};
  AdamConfig adam{};
  /// Keep C_d out of the E_d update (step 4).
  bool detach_cd = false;
};

/// The six networks. Parameters live under the prefixes "E_d", "E_l", "Dec",
/// "Dis", "C_d" and "C_l".
class FLFModel {
 public:
  FLFModel(FLFConfig config, std::uint64_t seed);

  const FLFConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  const Mlp& e_d() const { return e_d_; }
  const Mlp& e_l() const { return e_l_; }
  const Mlp& dec() const { return dec_; }
  const Mlp& dis() const { return dis_; }
  const Mlp& c_d() const { return c_d_; }
  const Mlp& c_l() const { return c_l_; }

  /// Dec(concat(d, s, l)).
  Var decode(Graph& graph, Var d, Var s, Var l) const;

 private:
  FLFConfig config_;
  ParamStore params_;
  Mlp e_d_, e_l_, dec_, dis_, c_d_, c_l_;
};

struct Decomposition {
  Tensor d;
  Tensor l;
};

Decomposition encode_decompose(const FLFModel& model, const Tensor& x);

struct FLFBatch {
  Tensor x;             // B x D
  Tensor s;             // B x N, entries 0/1
  std::vector<int> y;
};

FLFBatch make_flf_batch(const Dataset& dataset, std::span<const std::size_t> indices);

// Each loss runs the encoders it needs on `graph` and returns the batch mean.
Var loss_cd(Graph& graph, const FLFModel& model, Var x, const std::vector<int>& y);
Var loss_dis(Graph& graph, const FLFModel& model, Var x, Var s);
Var loss_cl(Graph& graph, const FLFModel& model, Var x, const std::vector<int>& y);
Var loss_rec(Graph& graph, const FLFModel& model, Var x, Var s);

// Tensor-in, scalar-out conveniences.
double loss_cd(const FLFModel& model, const FLFBatch& batch);
double loss_dis(const FLFModel& model, const FLFBatch& batch);
double loss_cl(const FLFModel& model, const FLFBatch& batch);
double loss_rec(const FLFModel& model, const FLFBatch& batch);

struct FLFStepMetrics {
  std::int64_t iter = 0;
  double loss_cd = 0.0;
  double loss_dis = 0.0;
  double loss_cl = 0.0;
  double loss_rec = 0.0;
  double objective_ed = 0.0;
  double objective_el = 0.0;
  double alpha_adv = 0.0;
};

/// One Adam optimizer per component.
class FLFOptimizers {
 public:
  explicit FLFOptimizers(const AdamConfig& config);
  Adam dis, c_l, c_d, e_d, e_l, dec;
};

enum class FLFComponent { kDis, kCl, kCd, kEd, kEl, kDec };
std::string to_string(FLFComponent component);

/// One alternating update of all six components in the order
/// Dis, C_l, C_d, E_d, E_l, Dec. Loss values are the ones each component
/// descended on. A non-finite loss raises TrainingError naming the component.
FLFStepMetrics flf_train_step(FLFModel& model, FLFOptimizers& optimizers, const FLFBatch& batch,
                              std::int64_t iter);

/// Minibatch driver over a dataset; epochs are reshuffled from `seed`.
struct FLFRunConfig {
  std::int64_t iters = 20000;
  std::size_t batch_size = 32;
  std::int64_t log_every = 50;
};

class FLFTrainer {
 public:
  FLFTrainer(const Dataset& train, FLFConfig config, FLFRunConfig run, std::uint64_t seed);

  FLFStepMetrics step();
  /// Runs to `run.iters`, returning metrics rows at the logging interval
  /// (plus the final iteration).
  std::vector<FLFStepMetrics> run();

  const FLFModel& model() const { return model_; }
  FLFModel& model() { return model_; }
  std::int64_t iter() const { return iter_; }

 private:
  const Dataset& train_;
  FLFRunConfig run_;
  FLFModel model_;
  FLFOptimizers optimizers_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::int64_t iter_ = 0;
};

void write_flf_metrics_csv(const std::filesystem::path& path,
                           const std::vector<FLFStepMetrics>& rows);

}  // namespace disent
