#include <gtest/gtest.h>

#include "disent/metric_training.hpp"
#include "disent/mining.hpp"

using namespace disent;

namespace {

Dataset small_identity(std::uint64_t seed) {
  IdentityExpressionSpec spec;
  spec.num_subjects = 8;
  spec.repetitions = 4;
  return gen_identity_expression_dataset(spec, seed);
}

}  // namespace

TEST(MetricTrainer, IterationCountersMatchClosedForm) {
  Dataset ds = small_identity(1);
  MetricTrainConfig cfg;
  cfg.X = 12;
  cfg.N = 6;
  cfg.M = 6;
  MetricTrainer trainer(ds, cfg);
  auto expected = cost_report(12, 6, 6, CostMethod::kTupleClusters);
  for (int i = 0; i < 3; ++i) {
    auto stats = trainer.step();
    EXPECT_EQ(stats.cost.input_passes, expected.input_passes);
    EXPECT_EQ(stats.cost.distance_calculations, expected.distance_calculations);
    EXPECT_GE(stats.mean_kept_positives, 1.0);
    EXPECT_LE(stats.mean_kept_positives, 6.0);
  }
}

TEST(MetricTrainer, EveryLossTrainsDeterministically) {
  Dataset ds = small_identity(2);
  for (auto loss : {MetricLoss::kTriplet, MetricLoss::kNPlusOne, MetricLoss::kCoupledClusters,
                    MetricLoss::kTupleClusters, MetricLoss::kAdaptiveTupleClusters}) {
    MetricTrainConfig cfg;
    cfg.loss = loss;
    cfg.X = 4;
    MetricTrainer a(ds, cfg), b(ds, cfg);
    for (int i = 0; i < 5; ++i) {
      auto sa = a.step(), sb = b.step();
      ASSERT_TRUE(std::isfinite(sa.loss)) << to_string(loss);
      EXPECT_EQ(sa.loss, sb.loss) << to_string(loss);
    }
    for (const auto& [name, t] : a.params()) EXPECT_EQ(t.storage(), b.params().at(name).storage()) << name;
    EXPECT_EQ(parse_metric_loss(to_string(loss)), loss);
  }
  EXPECT_FALSE(parse_metric_loss("contrastive").has_value());
}

TEST(MetricTrainer, TwoBranchJointTraining) {
  Dataset ds = small_identity(3);
  MetricTrainConfig cfg;
  cfg.two_branch = true;
  cfg.X = 4;
  MetricTrainer trainer(ds, cfg);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::isfinite(trainer.step().loss));
  EXPECT_EQ(trainer.embed(ds.features()).cols(), cfg.embedding_dim);
}

TEST(OneNearestNeighbour, HandExample) {
  Tensor ref = Tensor::matrix(3, 1, {0, 10, 20});
  Tensor q = Tensor::matrix(4, 1, {1, 9, 19, 14});
  EXPECT_DOUBLE_EQ(one_nn_accuracy(ref, {0, 1, 2}, q, {0, 1, 2, 2}), 0.75);
}
