#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disent/embeddings.hpp"
#include "disent/synthdata.hpp"

namespace disent {

/// Lookup tables over a dataset keyed by subject, class and (subject, class).
class SampleIndex {
 public:
  explicit SampleIndex(const Dataset& dataset);

  const Dataset& dataset() const { return *dataset_; }
  const std::vector<std::size_t>& by_subject(int subject) const;
  const std::vector<std::size_t>& by_class(int class_y) const;

 private:
  const Dataset* dataset_;
  std::map<int, std::vector<std::size_t>> subjects_;
  std::map<int, std::vector<std::size_t>> classes_;
  std::vector<std::size_t> empty_;
};

/// Identity-aware negatives: other-class samples of the query's own subject,
/// topped up with other-class samples of the positives' subjects when the
/// query's subject has fewer than `count`. Sampled down to `count`.
std::vector<std::size_t> build_negative_set(const SampleIndex& index, std::size_t query,
                                            std::span<const std::size_t> positives,
                                            std::size_t count, std::mt19937_64& rng);

/// `count` same-class samples chosen uniformly, preferring other subjects.
std::vector<std::size_t> sample_positive_set(const SampleIndex& index, std::size_t query,
                                             std::size_t count, std::mt19937_64& rng);

struct MiningResult {
  std::vector<std::size_t> kept_positive_indices;
  std::size_t M_star = 0;
  double nearest_negative_distance = 0.0;

  /// keep[i] for each of `total` positives.
  std::vector<bool> keep_mask(std::size_t total) const;
};

/// Keeps positives no farther from the (all-positive) center than the nearest
/// negative; ties are kept. Falls back to the single nearest positive.
MiningResult mine_positives(const Tensor& positive_embeddings, const Tensor& negative_embeddings,
                            const MahalanobisMetric& metric, CostCounter* counter = nullptr);

struct TupletIndices {
  std::size_t query = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};

/// Positives and negatives for each query.
std::vector<TupletIndices> assemble_tuplet_indices(const SampleIndex& index,
                                                   std::span<const std::size_t> queries,
                                                   std::size_t N, std::size_t M,
                                                   std::mt19937_64& rng);

/// Maps sample indices to their embeddings, one row per index.
using EmbeddingProvider = std::function<Tensor(std::span<const std::size_t>)>;

struct TupleBatch {
  TupletIndices indices;
  Tensor positives;  // M x d
  Tensor negatives;  // N x d
  MiningResult mining;
};

/// X random queries, each with N negatives and M mined positives.
std::vector<TupleBatch> assemble_tuplet_batch(const Dataset& dataset, std::size_t X, std::size_t N,
                                              std::size_t M, std::uint64_t seed,
                                              const EmbeddingProvider& embed,
                                              const MahalanobisMetric& metric,
                                              bool mining_enabled = true);

enum class CostMethod { kTupleClusters, kTriplet, kNPlusOneTuplet };

std::string to_string(CostMethod method);
std::optional<CostMethod> parse_cost_method(const std::string& name);

struct CostReport {
  std::int64_t input_passes = 0;
  std::int64_t distance_calculations = 0;
  CostMethod method = CostMethod::kTupleClusters;
};

/// Closed-form per-batch costs for X queries.
CostReport cost_report(std::int64_t X, std::int64_t N, std::int64_t M, CostMethod method);

}  // namespace disent
