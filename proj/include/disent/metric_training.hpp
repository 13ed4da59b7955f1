#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "disent/embeddings.hpp"
#include "disent/metric_losses.hpp"
#include "disent/mining.hpp"
#include "disent/optim.hpp"
#include "disent/synthdata.hpp"

namespace disent {

enum class MetricLoss { kTriplet, kNPlusOne, kCoupledClusters, kTupleClusters, kAdaptiveTupleClusters };

std::string to_string(MetricLoss loss);
std::optional<MetricLoss> parse_metric_loss(const std::string& name);

struct MetricTrainConfig {
  MetricLoss loss = MetricLoss::kTupleClusters;
  FixedThreshold threshold{1.0, 0.5};
  bool trainable_T = false;
  std::size_t rank_a = 4;
  std::size_t rank_b = 4;

  std::size_t X = 12;  // queries per iteration
  std::size_t N = 6;   // negatives per query
  std::size_t M = 6;   // positives per query
  bool mining_enabled = true;
  bool center_over_all = false;

  std::size_t hidden = 32;
  std::size_t embedding_dim = 8;
  /// Joint softmax + metric training through TwoBranchNet instead of a plain encoder.
  bool two_branch = false;
  std::size_t d_input = 16;
  std::size_t d_output = 16;
  JointWeights joint{};

  SgdConfig sgd{0.01, 0.9, 0.0};
  std::uint64_t seed = 0;
};

struct MetricStepStats {
  double loss = 0.0;
  double mean_kept_positives = 0.0;
  CostCounter cost;
};

/// Minibatch training of an embedding on tuplets mined from `train`.
/// Each query's positives and negatives go through the network in one pass.
class MetricTrainer {
 public:
  MetricTrainer(const Dataset& train, MetricTrainConfig config);

  MetricStepStats step();
  /// Embeddings (metric branch) for rows of x.
  Tensor embed(const Tensor& x) const;
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const MetricTrainConfig& config() const { return config_; }

 private:
  std::vector<std::size_t> next_queries();
  bool needs_query_row() const;

  const Dataset& train_;
  MetricTrainConfig config_;
  SampleIndex index_;
  std::mt19937_64 rng_;
  ParamStore params_;
  Mlp encoder_;
  std::optional<TwoBranchNet> net_;
  SgdMomentum optimizer_;
  MahalanobisMetric metric_;
  std::vector<std::size_t> epoch_order_;
  std::size_t epoch_pos_ = 0;
};

/// Fraction of queries whose nearest reference row (squared Euclidean) has the same label.
double one_nn_accuracy(const Tensor& reference, const std::vector<int>& reference_labels,
                       const Tensor& queries, const std::vector<int>& query_labels);

/// Subset of a dataset by sample index.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

}  // namespace disent
