#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "disent/errors.hpp"
#include "disent/mining.hpp"
#include "oracles.hpp"

using namespace disent;

namespace {

Dataset cells(const std::vector<std::pair<int, int>>& subject_class, std::size_t dim = 2) {
  Dataset ds;
  ds.num_classes = 0;
  ds.feature_dim = dim;
  for (auto [s, y] : subject_class) {
    Sample smp;
    smp.subject_id = s;
    smp.class_y = y;
    smp.features_x.assign(dim, static_cast<double>(ds.samples.size()));
    ds.samples.push_back(smp);
    ds.num_classes = std::max<std::size_t>(ds.num_classes, y + 1);
  }
  return ds;
}

Tensor col(std::vector<double> v) { return Tensor::column(std::move(v)); }

}  // namespace

TEST(NegativeSet, OwnSubjectOtherClasses) {
  Dataset ds = cells({{7, 0}, {7, 1}, {7, 2}, {7, 1}, {3, 1}, {3, 0}, {7, 0}});
  SampleIndex index(ds);
  std::mt19937_64 rng(0);
  auto neg = build_negative_set(index, 0, {}, 3, rng);
  ASSERT_EQ(neg.size(), 3u);
  for (auto i : neg) {
    EXPECT_EQ(ds.samples[i].subject_id, 7);
    EXPECT_NE(ds.samples[i].class_y, 0);
  }
}

TEST(NegativeSet, FallsBackToPositivesSubjects) {
  // Subject 1 has only class 0; the positive comes from subject 2.
  Dataset ds = cells({{1, 0}, {2, 0}, {2, 1}, {2, 2}, {4, 1}});
  SampleIndex index(ds);
  std::mt19937_64 rng(0);
  std::vector<std::size_t> positives{1};
  auto neg = build_negative_set(index, 0, positives, 2, rng);
  std::set<std::size_t> got(neg.begin(), neg.end());
  EXPECT_EQ(got, (std::set<std::size_t>{2, 3}));
}

TEST(NegativeSet, EmptyCandidateSetIsMiningError) {
  Dataset ds = cells({{1, 0}, {1, 0}, {1, 0}});
  SampleIndex index(ds);
  std::mt19937_64 rng(0);
  try {
    build_negative_set(index, 0, {}, 2, rng);
    FAIL();
  } catch (const MiningError& e) {
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
}

TEST(PositiveSet, ExactlyMCandidatesReturnsAll) {
  Dataset ds = cells({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {1, 1}});
  SampleIndex index(ds);
  for (std::uint64_t seed : {0u, 5u, 9u}) {
    std::mt19937_64 rng(seed);
    auto pos = sample_positive_set(index, 0, 3, rng);
    EXPECT_EQ(std::set<std::size_t>(pos.begin(), pos.end()), (std::set<std::size_t>{1, 2, 3}));
  }
}

TEST(PositiveSet, DeterministicPerSeed) {
  std::vector<std::pair<int, int>> sc;
  for (int s = 0; s < 12; ++s) sc.push_back({s, 0});
  Dataset ds = cells(sc);
  SampleIndex index(ds);
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(sample_positive_set(index, 0, 4, a), sample_positive_set(index, 0, 4, b));
}

TEST(PositiveSet, InsufficientCandidatesIsMiningError) {
  Dataset ds = cells({{0, 0}, {1, 0}, {1, 1}});
  SampleIndex index(ds);
  std::mt19937_64 rng(0);
  EXPECT_THROW(sample_positive_set(index, 0, 3, rng), MiningError);
}

TEST(PositiveSet, UniformOverCandidates) {
  // Query plus 2M = 6 same-class candidates from other subjects.
  std::vector<std::pair<int, int>> sc{{0, 0}};
  for (int s = 1; s <= 6; ++s) sc.push_back({s, 0});
  Dataset ds = cells(sc);
  SampleIndex index(ds);
  std::mt19937_64 rng(42);
  std::map<std::size_t, int> freq;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t)
    for (auto i : sample_positive_set(index, 0, 3, rng)) freq[i]++;
  ASSERT_EQ(freq.size(), 6u);
  for (auto [i, f] : freq) EXPECT_NEAR(f / double(draws), 0.5, 0.02) << i;
}

TEST(MinePositives, Examples) {
  auto m = MahalanobisMetric::identity(1);
  auto m2 = MahalanobisMetric::identity(2);
  // Center at the origin; squared distances 0.5, 2.0 and 2.5.
  Tensor pos = Tensor::matrix(3, 2, {std::sqrt(0.5), 0, 0, std::sqrt(2.0), -std::sqrt(0.5), -std::sqrt(2.0)});
  Tensor neg = Tensor::row({1.0, 0.0});
  auto r = mine_positives(pos, neg, m2);
  EXPECT_EQ(r.kept_positive_indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.M_star, 1u);
  EXPECT_DOUBLE_EQ(r.nearest_negative_distance, 1.0);

  auto all = mine_positives(col({1, 1.1, 0.9}), col({10}), m);
  EXPECT_EQ(all.M_star, 3u);

  // Center 16/15; every positive is farther than the negative at 1.0, the last one least so.
  auto far = mine_positives(col({-3, 3.2, 3.0}), col({1.0}), m);
  EXPECT_EQ(far.kept_positive_indices, (std::vector<std::size_t>{2}));
  EXPECT_EQ(far.keep_mask(3), (std::vector<bool>{false, false, true}));
}

TEST(MinePositives, TiesAreKept) {
  auto m = MahalanobisMetric::identity(1);
  auto r = mine_positives(col({-1, 1}), col({1}), m);
  EXPECT_EQ(r.M_star, 2u);
}

TEST(MinePositives, MatchesBruteForceRule) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    auto inst = oracle::random_mining_instance(rng);
    auto r = mine_positives(inst.positives, inst.negatives, inst.metric);
    EXPECT_EQ(r.kept_positive_indices, oracle::mine_raw(inst)) << "draw " << t;
    EXPECT_EQ(r.M_star, r.kept_positive_indices.size());
  }
}

namespace {

Dataset identity_like() {
  IdentityExpressionSpec spec;
  spec.num_subjects = 10;
  spec.repetitions = 3;
  return gen_identity_expression_dataset(spec, 1);
}

}  // namespace

TEST(TupletBatch, SampleCountsAndIdentityConstraint) {
  Dataset ds = identity_like();
  auto embed = [&](std::span<const std::size_t> idx) { return ds.features(idx); };
  auto metric = MahalanobisMetric::identity(ds.feature_dim);
  for (auto [N, M, expected] : {std::tuple{6u, 6u, 144u}, std::tuple{5u, 5u, 120u}}) {
    auto batch = assemble_tuplet_batch(ds, 12, N, M, 3, embed, metric);
    ASSERT_EQ(batch.size(), 12u);
    std::size_t referenced = 0;
    for (const auto& b : batch) {
      referenced += b.indices.positives.size() + b.indices.negatives.size();
      const auto& q = ds.samples[b.indices.query];
      for (auto i : b.indices.negatives) {
        EXPECT_EQ(ds.samples[i].subject_id, q.subject_id);
        EXPECT_NE(ds.samples[i].class_y, q.class_y);
      }
      for (auto i : b.indices.positives) EXPECT_EQ(ds.samples[i].class_y, q.class_y);
      EXPECT_GE(b.mining.M_star, 1u);
    }
    EXPECT_EQ(referenced, expected);
  }
}

TEST(TupletBatch, DeterministicPerSeedAndSeedsDiffer) {
  Dataset ds = identity_like();
  auto embed = [&](std::span<const std::size_t> idx) { return ds.features(idx); };
  auto metric = MahalanobisMetric::identity(ds.feature_dim);
  auto key = [&](std::uint64_t seed) {
    std::vector<std::size_t> flat;
    for (const auto& b : assemble_tuplet_batch(ds, 12, 6, 6, seed, embed, metric)) {
      flat.push_back(b.indices.query);
      flat.insert(flat.end(), b.indices.positives.begin(), b.indices.positives.end());
      flat.insert(flat.end(), b.indices.negatives.begin(), b.indices.negatives.end());
    }
    return flat;
  };
  EXPECT_EQ(key(4), key(4));
  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t s = 0; s < 10; ++s) distinct.insert(key(s));
  EXPECT_EQ(distinct.size(), 10u);
}

TEST(CostReport, ClosedForms) {
  auto tc = cost_report(12, 6, 6, CostMethod::kTupleClusters);
  EXPECT_EQ(tc.input_passes, 12);
  EXPECT_EQ(tc.distance_calculations, 288);
  auto tr = cost_report(12, 6, 6, CostMethod::kTriplet);
  EXPECT_EQ(tr.input_passes, 220);
  EXPECT_EQ(tr.distance_calculations, 440);
  auto np = cost_report(12, 6, 6, CostMethod::kNPlusOneTuplet);
  EXPECT_EQ(np.input_passes, 156);
  EXPECT_EQ(np.distance_calculations, 1872);
  EXPECT_THROW(cost_report(0, 6, 6, CostMethod::kTriplet), ContractViolation);
}
