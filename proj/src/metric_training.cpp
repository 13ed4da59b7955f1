#include "disent/metric_training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "disent/errors.hpp"

namespace disent {

namespace {

constexpr const char* kThresholdParam = "threshold.T";
constexpr const char* kInputMean = "input.mean";
constexpr const char* kInputScale = "input.inv_std";

// Per-feature standardization statistics of the training inputs.
void store_input_stats(const Dataset& train, ParamStore& params) {
  const std::size_t d = train.feature_dim;
  Tensor mean({1, d}, 0.0);
  Tensor inv_std({1, d}, 0.0);
  const double n = static_cast<double>(train.size());
  for (const auto& s : train.samples) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += s.features_x[c] / n;
  }
  for (const auto& s : train.samples) {
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = s.features_x[c] - mean[c];
      inv_std[c] += diff * diff / n;
    }
  }
  for (std::size_t c = 0; c < d; ++c) inv_std[c] = 1.0 / std::sqrt(inv_std[c] + 1e-12);
  params.insert_or_assign(kInputMean, mean);
  params.insert_or_assign(kInputScale, inv_std);
}

Var standardize(Graph& graph, const ParamStore& params, Tensor x) {
  const Tensor& mean = params.at(kInputMean);
  const Tensor& inv_std = params.at(kInputScale);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) x.at(r, c) = (x.at(r, c) - mean[c]) * inv_std[c];
  }
  return graph.constant(std::move(x));
}

}  // namespace

std::string to_string(MetricLoss loss) {
  switch (loss) {
    case MetricLoss::kTriplet: return "triplet";
    case MetricLoss::kNPlusOne: return "n_plus_one";
    case MetricLoss::kCoupledClusters: return "ccl";
    case MetricLoss::kTupleClusters: return "tuple_clusters";
    case MetricLoss::kAdaptiveTupleClusters: return "adaptive_tuple_clusters";
  }
  return "unknown";
}

std::optional<MetricLoss> parse_metric_loss(const std::string& name) {
  for (auto l : {MetricLoss::kTriplet, MetricLoss::kNPlusOne, MetricLoss::kCoupledClusters,
                 MetricLoss::kTupleClusters, MetricLoss::kAdaptiveTupleClusters}) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

MetricTrainer::MetricTrainer(const Dataset& train, MetricTrainConfig config)
    : train_(train),
      config_(config),
      index_(train),
      rng_(config.seed),
      optimizer_(config.sgd),
      metric_(MahalanobisMetric::identity(config.embedding_dim)) {
  if (config_.X == 0 || config_.N == 0 || config_.M == 0) {
    throw std::invalid_argument("X, N and M must be positive");
  }
  if (config_.X > train_.size()) throw std::invalid_argument("X exceeds the training set size");
  config_.threshold.validate();

  store_input_stats(train_, params_);
  if (config_.two_branch) {
    TwoBranchConfig net_config;
    net_config.input_dim = train_.feature_dim;
    net_config.trunk_hidden = config_.hidden;
    net_config.d_input = config_.d_input;
    net_config.d_output = config_.d_output;
    net_config.embedding_dim = config_.embedding_dim;
    net_config.num_classes = train_.num_classes;
    net_.emplace(net_config);
    net_->init(params_, rng_);
  } else {
    encoder_ = Mlp("encoder", {train_.feature_dim, config_.hidden, config_.hidden,
                               config_.embedding_dim});
    encoder_.init(params_, rng_);
  }
  if (config_.loss == MetricLoss::kAdaptiveTupleClusters) {
    AdaptiveParams::random(config_.embedding_dim, config_.rank_a, config_.rank_b, 0.1, rng_)
        .store(params_);
  }
  if (config_.trainable_T) params_.insert_or_assign(kThresholdParam, Tensor::scalar(config_.threshold.T));

  epoch_order_.resize(train_.size());
  std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
  std::shuffle(epoch_order_.begin(), epoch_order_.end(), rng_);
}

bool MetricTrainer::needs_query_row() const {
  return config_.two_branch || config_.loss == MetricLoss::kTriplet ||
         config_.loss == MetricLoss::kNPlusOne;
}

std::vector<std::size_t> MetricTrainer::next_queries() {
  std::vector<std::size_t> queries;
  while (queries.size() < config_.X) {
    if (epoch_pos_ == epoch_order_.size()) {
      std::shuffle(epoch_order_.begin(), epoch_order_.end(), rng_);
      epoch_pos_ = 0;
    }
    queries.push_back(epoch_order_[epoch_pos_++]);
  }
  return queries;
}

MetricStepStats MetricTrainer::step() {
  MetricStepStats stats;
  const auto queries = next_queries();
  const auto tuples = assemble_tuplet_indices(index_, queries, config_.N, config_.M, rng_);

  Graph graph;
  std::optional<AdaptiveVars> adaptive;
  if (config_.loss == MetricLoss::kAdaptiveTupleClusters) {
    adaptive = adaptive_parameters(graph, params_);
  }
  std::optional<Var> trainable_T;
  if (config_.trainable_T) trainable_T = graph.parameter(params_, kThresholdParam);

  Var total;
  bool have_total = false;
  double kept_total = 0.0;
  for (const auto& t : tuples) {
    const std::size_t M = t.positives.size();
    const std::size_t N = t.negatives.size();
    const bool with_query = needs_query_row();
    std::vector<std::size_t> rows;
    if (with_query) rows.push_back(t.query);
    rows.insert(rows.end(), t.positives.begin(), t.positives.end());
    rows.insert(rows.end(), t.negatives.begin(), t.negatives.end());

    Var x = standardize(graph, params_, train_.features(rows));
    ++stats.cost.input_passes;
    Var embedding;
    std::optional<Var> softmax_term;
    if (net_) {
      auto out = net_->forward(graph, params_, x);
      embedding = out.embedding;
      softmax_term = softmax_cross_entropy(slice(out.logits, 0, 0, 1), {train_.samples[t.query].class_y});
    } else {
      embedding = encoder_.forward(graph, params_, x);
    }
    const std::size_t offset = with_query ? 1 : 0;
    Var positives = slice(embedding, 0, offset, offset + M);
    Var negatives = slice(embedding, 0, offset + M, offset + M + N);

    TupleLossOptions options;
    options.center_over_all = config_.center_over_all;
    options.trainable_T = trainable_T;
    options.counter = &stats.cost;
    if (config_.mining_enabled &&
        (config_.loss == MetricLoss::kTupleClusters || config_.loss == MetricLoss::kAdaptiveTupleClusters)) {
      const auto mined = mine_positives(positives.value(), negatives.value(), metric_, &stats.cost);
      options.keep = mined.keep_mask(M);
      kept_total += static_cast<double>(mined.M_star);
    } else {
      kept_total += static_cast<double>(M);
    }

    Var metric_term;
    switch (config_.loss) {
      case MetricLoss::kTriplet: {
        Var anchor = slice(embedding, 0, 0, 1);
        metric_term = triplet_loss(anchor, slice(positives, 0, 0, 1), slice(negatives, 0, 0, 1),
                                   config_.threshold.tau, metric_);
        break;
      }
      case MetricLoss::kNPlusOne:
        metric_term = n_plus_one_tuplet_loss(slice(embedding, 0, 0, 1), slice(positives, 0, 0, 1),
                                             negatives, config_.threshold.tau, metric_);
        break;
      case MetricLoss::kCoupledClusters:
        metric_term = coupled_clusters_loss(positives, negatives, config_.threshold.tau, metric_);
        break;
      case MetricLoss::kTupleClusters:
        metric_term = tuple_clusters_loss(positives, negatives, config_.threshold, metric_, options);
        break;
      case MetricLoss::kAdaptiveTupleClusters:
        metric_term = adaptive_tuple_clusters_loss(positives, negatives, *adaptive, options);
        break;
    }
    Var tuple_loss = softmax_term ? joint_objective(*softmax_term, metric_term, config_.joint)
                                  : metric_term;
    total = have_total ? add(total, tuple_loss) : tuple_loss;
    have_total = true;
  }
  Var loss = scale(total, 1.0 / static_cast<double>(tuples.size()));
  stats.loss = loss.item();
  stats.mean_kept_positives = kept_total / static_cast<double>(tuples.size());
  optimizer_.step(params_, graph.backward(loss));
  return stats;
}

Tensor MetricTrainer::embed(const Tensor& x) const {
  Graph graph;
  Var in = standardize(graph, params_, x);
  if (net_) return net_->forward(graph, params_, in).embedding.value();
  return encoder_.forward(graph, params_, in).value();
}

double one_nn_accuracy(const Tensor& reference, const std::vector<int>& reference_labels,
                       const Tensor& queries, const std::vector<int>& query_labels) {
  if (reference.cols() != queries.cols() || reference.rows() != reference_labels.size() ||
      queries.rows() != query_labels.size()) {
    throw ContractViolation("one_nn_accuracy: shape mismatch");
  }
  std::size_t correct = 0;
  const std::size_t d = reference.cols();
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      double dist = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = queries.at(q, c) - reference.at(r, c);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_row = r;
      }
    }
    correct += reference_labels[best_row] == query_labels[q];
  }
  return static_cast<double>(correct) / static_cast<double>(queries.rows());
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = dataset.num_classes;
  out.num_attrs = dataset.num_attrs;
  out.feature_dim = dataset.feature_dim;
  for (auto i : indices) out.samples.push_back(dataset.samples.at(i));
  return out;
}

}  // namespace disent
