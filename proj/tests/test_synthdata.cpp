#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "disent/synthdata.hpp"

using namespace disent;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(FactorData, FullDependencyCopiesLowBitOfClass) {
  FactorSpec spec{.num_classes = 2, .num_attrs = 1, .dependency_rho = 1.0};
  Dataset ds = gen_factor_dataset(spec, 100, 4);
  ASSERT_EQ(ds.size(), 100u);
  for (const auto& s : ds.samples) EXPECT_EQ(s.attrs_s[0], s.class_y % 2);
}

TEST(FactorData, IndependentAttributesAreUncorrelatedWithClass) {
  FactorSpec spec{.num_classes = 5, .num_attrs = 2, .dependency_rho = 0.0};
  Dataset ds = gen_factor_dataset(spec, 10000, 21);
  std::vector<double> y;
  std::vector<int> yi;
  for (const auto& s : ds.samples) y.push_back(s.class_y), yi.push_back(s.class_y);
  for (std::size_t bit = 0; bit < 2; ++bit) {
    std::vector<double> s;
    std::vector<int> si;
    for (const auto& smp : ds.samples) s.push_back(smp.attrs_s[bit]), si.push_back(smp.attrs_s[bit]);
    EXPECT_LE(std::abs(pearson(y, s)), 0.05);
    EXPECT_LE(empirical_mutual_information(yi, si), 0.01);
  }
}

TEST(FactorData, ClassesBalancedWithinOne) {
  Dataset ds = gen_factor_dataset(FactorSpec{}, 1003, 2);
  std::vector<int> counts(5, 0);
  for (const auto& s : ds.samples) counts[s.class_y]++;
  for (int c : counts) EXPECT_LE(std::abs(c - 1003 / 5), 1);
}

TEST(FactorData, NoiselessMapIsDeterministicInFactors) {
  FactorSpec spec;
  spec.noise_sigma = 0.0;
  spec.latent_scale = 0.0;
  Dataset ds = gen_factor_dataset(spec, 500, 8);
  // With no noise and no latent contribution x depends on (y, s) only.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      const auto& a = ds.samples[i];
      const auto& b = ds.samples[j];
      if (a.class_y == b.class_y && a.attrs_s == b.attrs_s) {
        ASSERT_EQ(a.features_x, b.features_x);
      }
    }
  }
}

TEST(FactorData, TooFewSamplesRejected) {
  EXPECT_THROW(gen_factor_dataset(FactorSpec{}, 4, 0), std::invalid_argument);
}

TEST(FactorData, SameSeedBitIdentical) {
  Dataset a = gen_factor_dataset(FactorSpec{}, 200, 5);
  Dataset b = gen_factor_dataset(FactorSpec{}, 200, 5);
  EXPECT_EQ(dataset_to_csv(a), dataset_to_csv(b));
  Dataset c = gen_factor_dataset(FactorSpec{}, 200, 6);
  EXPECT_NE(dataset_to_csv(a), dataset_to_csv(c));
}

TEST(FactorData, CsvRoundTripIsLossless) {
  Dataset a = gen_factor_dataset(FactorSpec{}, 50, 5);
  Dataset b = dataset_from_csv(dataset_to_csv(a));
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(b.num_attrs, a.num_attrs);
  EXPECT_EQ(b.feature_dim, a.feature_dim);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].subject_id, b.samples[i].subject_id);
    EXPECT_EQ(a.samples[i].class_y, b.samples[i].class_y);
    EXPECT_EQ(a.samples[i].attrs_s, b.samples[i].attrs_s);
    EXPECT_EQ(a.samples[i].features_x, b.samples[i].features_x);
  }
  const std::string header = dataset_to_csv(a).substr(0, dataset_to_csv(a).find('\n'));
  EXPECT_EQ(header.rfind("subject_id,y,s0,s1,x0,x1,", 0), 0u);
}

TEST(IdentityData, SampleCountIsSubjectsTimesClassesTimesRepetitions) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 3;
  spec.num_classes = 4;
  spec.repetitions = 5;
  Dataset ds = gen_identity_expression_dataset(spec, 1);
  EXPECT_EQ(ds.size(), 3u * 4u * 5u);
  std::set<std::pair<int, int>> cells;
  for (const auto& s : ds.samples) cells.insert({s.subject_id, s.class_y});
  EXPECT_EQ(cells.size(), 12u);
}

TEST(IdentityData, NoiselessCellsAreIdentical) {
  IdentityExpressionSpec spec;
  spec.noise_sigma = 0.0;
  Dataset ds = gen_identity_expression_dataset(spec, 1);
  for (const auto& a : ds.samples) {
    for (const auto& b : ds.samples) {
      if (a.subject_id == b.subject_id && a.class_y == b.class_y) ASSERT_EQ(a.features_x, b.features_x);
    }
  }
}

TEST(IdentityData, InvalidArgumentsRejected) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 1;
  EXPECT_THROW(gen_identity_expression_dataset(spec, 1), std::invalid_argument);
  spec.num_subjects = 4;
  spec.num_classes = 1;
  EXPECT_THROW(gen_identity_expression_dataset(spec, 1), std::invalid_argument);
}

TEST(IdentityData, RawNearestNeighbourFollowsSubject) {
  Dataset ds = gen_identity_expression_dataset(IdentityExpressionSpec{}, 3);
  std::size_t same_subject = 0, same_class = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t best = i;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (j == i) continue;
      const auto& a = ds.samples[i];
      const auto& b = ds.samples[j];
      if (a.subject_id == b.subject_id && a.class_y == b.class_y) continue;
      double d = sqdist(ds.samples[i].features_x, ds.samples[j].features_x);
      if (d < best_d) best_d = d, best = j;
    }
    same_subject += ds.samples[best].subject_id == ds.samples[i].subject_id;
    same_class += ds.samples[best].class_y == ds.samples[i].class_y;
  }
  // Outside its own cell, a sample sits nearer its subject than its class.
  EXPECT_GE(same_subject, static_cast<std::size_t>(0.9 * ds.size()));
  EXPECT_GT(same_subject, same_class);
}

namespace {

std::vector<std::set<int>> fold_subjects(const Dataset& ds, const std::vector<std::vector<std::size_t>>& folds) {
  std::vector<std::set<int>> out;
  for (const auto& f : folds) {
    std::set<int> s;
    for (auto i : f) s.insert(ds.samples[i].subject_id);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(SubjectSplit, OneSubjectPerFold) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 8;
  Dataset ds = gen_identity_expression_dataset(spec, 2);
  auto subjects = fold_subjects(ds, subject_independent_split(ds, 8, 0));
  ASSERT_EQ(subjects.size(), 8u);
  for (const auto& s : subjects) EXPECT_EQ(s.size(), 1u);
}

TEST(SubjectSplit, FoldsAreSubjectDisjointAndCoverEverySample) {
  Dataset ds = gen_identity_expression_dataset(IdentityExpressionSpec{}, 2);
  auto folds = subject_independent_split(ds, 4, 9);
  auto subjects = fold_subjects(ds, folds);
  std::size_t total = 0;
  for (std::size_t a = 0; a < folds.size(); ++a) {
    total += folds[a].size();
    for (std::size_t b = a + 1; b < folds.size(); ++b) {
      for (int s : subjects[a]) EXPECT_EQ(subjects[b].count(s), 0u);
    }
  }
  EXPECT_EQ(total, ds.size());
}

TEST(SubjectSplit, TenSubjectsThreeFolds) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 10;
  Dataset ds = gen_identity_expression_dataset(spec, 2);
  for (auto& s : fold_subjects(ds, subject_independent_split(ds, 3, 4))) {
    EXPECT_TRUE(s.size() == 3 || s.size() == 4) << s.size();
  }
}

TEST(SubjectSplit, MoreFoldsThanSubjectsRejected) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 3;
  Dataset ds = gen_identity_expression_dataset(spec, 2);
  EXPECT_THROW(subject_independent_split(ds, 4, 0), std::invalid_argument);
}
