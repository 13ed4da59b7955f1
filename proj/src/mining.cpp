#include "disent/mining.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "disent/errors.hpp"

namespace disent {

namespace {

// Uniform sample of `count` elements without replacement (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t count, std::mt19937_64& rng) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

std::string describe(const Dataset& ds, std::size_t query) {
  const auto& s = ds.samples.at(query);
  return "query " + std::to_string(query) + " (subject " + std::to_string(s.subject_id) +
         ", class " + std::to_string(s.class_y) + ")";
}

}  // namespace

SampleIndex::SampleIndex(const Dataset& dataset) : dataset_(&dataset) {
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    subjects_[dataset.samples[i].subject_id].push_back(i);
    classes_[dataset.samples[i].class_y].push_back(i);
  }
}

const std::vector<std::size_t>& SampleIndex::by_subject(int subject) const {
  auto it = subjects_.find(subject);
  return it == subjects_.end() ? empty_ : it->second;
}

const std::vector<std::size_t>& SampleIndex::by_class(int class_y) const {
  auto it = classes_.find(class_y);
  return it == classes_.end() ? empty_ : it->second;
}

std::vector<std::size_t> build_negative_set(const SampleIndex& index, std::size_t query,
                                            std::span<const std::size_t> positives,
                                            std::size_t count, std::mt19937_64& rng) {
  const Dataset& ds = index.dataset();
  const Sample& q = ds.samples.at(query);
  std::vector<std::size_t> candidates;
  for (auto i : index.by_subject(q.subject_id)) {
    if (ds.samples[i].class_y != q.class_y) candidates.push_back(i);
  }
  if (candidates.size() < count) {
    std::set<std::size_t> seen(candidates.begin(), candidates.end());
    std::set<int> positive_subjects;
    for (auto p : positives) positive_subjects.insert(ds.samples.at(p).subject_id);
    positive_subjects.erase(q.subject_id);
    for (int subject : positive_subjects) {
      for (auto i : index.by_subject(subject)) {
        if (ds.samples[i].class_y != q.class_y && seen.insert(i).second) candidates.push_back(i);
      }
    }
  }
  if (candidates.empty()) {
    throw MiningError("no negative candidates for " + describe(ds, query));
  }
  return sample_without_replacement(std::move(candidates), count, rng);
}

std::vector<std::size_t> sample_positive_set(const SampleIndex& index, std::size_t query,
                                             std::size_t count, std::mt19937_64& rng) {
  const Dataset& ds = index.dataset();
  const Sample& q = ds.samples.at(query);
  std::vector<std::size_t> other_subjects;
  std::vector<std::size_t> same_subject;
  for (auto i : index.by_class(q.class_y)) {
    if (i == query) continue;
    (ds.samples[i].subject_id != q.subject_id ? other_subjects : same_subject).push_back(i);
  }
  if (other_subjects.size() + same_subject.size() < count) {
    throw MiningError("only " + std::to_string(other_subjects.size() + same_subject.size()) +
                      " positive candidates for " + describe(ds, query) + ", need " +
                      std::to_string(count));
  }
  if (other_subjects.size() >= count) {
    return sample_without_replacement(std::move(other_subjects), count, rng);
  }
  auto fill = sample_without_replacement(std::move(same_subject), count - other_subjects.size(), rng);
  other_subjects.insert(other_subjects.end(), fill.begin(), fill.end());
  return other_subjects;
}

std::vector<bool> MiningResult::keep_mask(std::size_t total) const {
  std::vector<bool> mask(total, false);
  for (auto i : kept_positive_indices) mask.at(i) = true;
  return mask;
}

MiningResult mine_positives(const Tensor& positive_embeddings, const Tensor& negative_embeddings,
                            const MahalanobisMetric& metric, CostCounter* counter) {
  const std::size_t M = positive_embeddings.rows();
  const std::size_t N = negative_embeddings.rows();
  const std::size_t d = positive_embeddings.cols();
  if (negative_embeddings.cols() != d) {
    throw ContractViolation("mine_positives: embedding dimensions differ");
  }
  std::vector<double> center(d, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < d; ++c) center[c] += positive_embeddings.at(i, c);
  }
  for (auto& v : center) v /= static_cast<double>(M);

  const auto row = [d](const Tensor& t, std::size_t i) {
    return std::span<const double>(t.data().subspan(i * d, d));
  };
  MiningResult result;
  result.nearest_negative_distance = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < N; ++j) {
    result.nearest_negative_distance = std::min(
        result.nearest_negative_distance, mahalanobis_distance(row(negative_embeddings, j), center, metric));
  }
  std::size_t nearest_positive = 0;
  double nearest_positive_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < M; ++i) {
    const double dist = mahalanobis_distance(row(positive_embeddings, i), center, metric);
    if (dist <= result.nearest_negative_distance) result.kept_positive_indices.push_back(i);
    if (dist < nearest_positive_distance) {
      nearest_positive_distance = dist;
      nearest_positive = i;
    }
  }
  if (result.kept_positive_indices.empty()) result.kept_positive_indices.push_back(nearest_positive);
  result.M_star = result.kept_positive_indices.size();
  if (counter) counter->distance_calculations += static_cast<std::int64_t>(M + N);
  return result;
}

std::vector<TupletIndices> assemble_tuplet_indices(const SampleIndex& index,
                                                   std::span<const std::size_t> queries,
                                                   std::size_t N, std::size_t M,
                                                   std::mt19937_64& rng) {
  std::vector<TupletIndices> tuples;
  tuples.reserve(queries.size());
  for (auto q : queries) {
    TupletIndices t;
    t.query = q;
    t.positives = sample_positive_set(index, q, M, rng);
    t.negatives = build_negative_set(index, q, t.positives, N, rng);
    tuples.push_back(std::move(t));
  }
  return tuples;
}

std::vector<TupleBatch> assemble_tuplet_batch(const Dataset& dataset, std::size_t X, std::size_t N,
                                              std::size_t M, std::uint64_t seed,
                                              const EmbeddingProvider& embed,
                                              const MahalanobisMetric& metric,
                                              bool mining_enabled) {
  if (X == 0 || N == 0 || M == 0) throw ContractViolation("X, N and M must be positive");
  if (X > dataset.size()) throw ContractViolation("more queries than samples");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto queries = sample_without_replacement(std::move(all), X, rng);

  const SampleIndex index(dataset);
  std::vector<TupleBatch> batches;
  for (auto& t : assemble_tuplet_indices(index, queries, N, M, rng)) {
    TupleBatch b;
    b.positives = embed(t.positives);
    b.negatives = embed(t.negatives);
    if (mining_enabled) {
      b.mining = mine_positives(b.positives, b.negatives, metric);
    } else {
      for (std::size_t i = 0; i < t.positives.size(); ++i) b.mining.kept_positive_indices.push_back(i);
      b.mining.M_star = t.positives.size();
    }
    b.indices = std::move(t);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::string to_string(CostMethod method) {
  switch (method) {
    case CostMethod::kTupleClusters: return "tuple_clusters";
    case CostMethod::kTriplet: return "triplet";
    case CostMethod::kNPlusOneTuplet: return "n_plus_one";
  }
  return "unknown";
}

std::optional<CostMethod> parse_cost_method(const std::string& name) {
  for (auto m : {CostMethod::kTupleClusters, CostMethod::kTriplet, CostMethod::kNPlusOneTuplet}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

CostReport cost_report(std::int64_t X, std::int64_t N, std::int64_t M, CostMethod method) {
  if (X <= 0 || N <= 0 || M <= 0) throw ContractViolation("cost_report needs positive X, N, M");
  CostReport r;
  r.method = method;
  switch (method) {
    case CostMethod::kTupleClusters:
      r.input_passes = X;
      r.distance_calculations = 2 * (N + M) * X;
      break;
    case CostMethod::kTriplet: {
      const std::int64_t triplets = X * (X - 1) * (X - 2) / 6;
      r.input_passes = triplets;
      r.distance_calculations = 2 * triplets;
      break;
    }
    case CostMethod::kNPlusOneTuplet:
      r.input_passes = (X + 1) * X;
      r.distance_calculations = (X + 1) * X * X;
      break;
  }
  return r;
}

}  // namespace disent
