#include <gtest/gtest.h>

#include <random>

#include "disent/embeddings.hpp"
#include "disent/errors.hpp"
#include "disent/gradcheck.hpp"

using namespace disent;

TEST(Mahalanobis, Examples) {
  std::vector<double> a{1.0, 0.0}, z{0.0, 0.0}, one{1.0, 1.0};
  EXPECT_DOUBLE_EQ(mahalanobis_distance(a, z, MahalanobisMetric::identity(2)), 1.0);
  EXPECT_DOUBLE_EQ(mahalanobis_distance(a, z, MahalanobisMetric(Tensor::matrix(2, 2, {2, 0, 0, 2}))), 2.0);
  EXPECT_DOUBLE_EQ(mahalanobis_distance(one, z, MahalanobisMetric(Tensor::matrix(2, 2, {2, 0, 0, 1}))), 3.0);
}

TEST(Mahalanobis, DimensionMismatchAndBadMatrices) {
  std::vector<double> a{1.0, 0.0}, b{1.0};
  EXPECT_THROW(mahalanobis_distance(a, b, MahalanobisMetric::identity(2)), ContractViolation);
  EXPECT_THROW(MahalanobisMetric(Tensor::matrix(2, 2, {1, 0.5, 0, 1})), ContractViolation);
  EXPECT_THROW(MahalanobisMetric(Tensor::matrix(2, 2, {1, 0, 0, -1})), ContractViolation);
}

TEST(Mahalanobis, IdentityIsSumOfSquaresAndSymmetric) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  auto metric = MahalanobisMetric::identity(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(5), b(5);
    double ss = 0;
    for (int i = 0; i < 5; ++i) a[i] = n(rng), b[i] = n(rng), ss += (a[i] - b[i]) * (a[i] - b[i]);
    EXPECT_NEAR(mahalanobis_distance(a, b, metric), ss, 1e-12);
    EXPECT_EQ(mahalanobis_distance(a, b, metric), mahalanobis_distance(b, a, metric));
    EXPECT_EQ(mahalanobis_distance(a, a, metric), 0.0);
  }
}

TEST(Encoder, ZeroWeightsGiveZeroEmbedding) {
  Mlp net("enc", {4, 3, 2});
  ParamStore p;
  for (auto& name : net.param_names()) p[name];
  std::mt19937_64 rng(0);
  net.init(p, rng);
  for (auto& [_, t] : p) std::fill(t.storage().begin(), t.storage().end(), 0.0);
  Tensor f = encoder_forward(net, p, Tensor::randn(3, 4, 1.0, rng));
  for (double v : f.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, IdentityLayerPassesInputThrough) {
  Mlp net("enc", {3, 3});
  ParamStore p{{"enc.l0.W", Tensor::identity(3)}, {"enc.l0.b", Tensor(Shape{1, 3})}};
  Tensor x = Tensor::matrix(2, 3, {1, -2, 3, 0.5, 0, -1});
  EXPECT_EQ(encoder_forward(net, p, x).storage(), x.storage());
}

TEST(Encoder, DeterministicAndShapeChecked) {
  std::mt19937_64 rng(4);
  Mlp net("enc", {4, 5, 2});
  ParamStore p;
  net.init(p, rng);
  Tensor x = Tensor::randn(3, 4, 1.0, rng);
  EXPECT_EQ(encoder_forward(net, p, x).storage(), encoder_forward(net, p, x).storage());
  EXPECT_EQ(encoder_forward(net, p, x).cols(), 2u);
  EXPECT_THROW(encoder_forward(net, p, Tensor::randn(3, 5, 1.0, rng)), ContractViolation);
}

TEST(ConnectingLayer, Examples) {
  Graph g;
  Var fc2 = g.constant(Tensor::row({1, 0}));
  Var fc3 = g.constant(Tensor::row({0, 1}));
  Var out = connecting_layer(fc2, fc3, g.constant(Tensor::matrix(2, 2, {2, 0, 0, 2})),
                             g.constant(Tensor::matrix(2, 2, {3, 0, 0, 3})));
  EXPECT_EQ(out.value().storage(), (std::vector<double>{2, 3}));

  Var eye = g.constant(Tensor::identity(2));
  EXPECT_EQ(connecting_layer(fc2, fc3, eye, eye).value().storage(), (std::vector<double>{1, 1}));
  Var zero = g.constant(Tensor(Shape{2, 2}));
  EXPECT_EQ(connecting_layer(fc2, fc3, zero, zero).value().storage(), (std::vector<double>{0, 0}));
  EXPECT_THROW(connecting_layer(fc2, g.constant(Tensor::row({1, 2, 3})), eye, eye), ContractViolation);
}

namespace {

struct Fixture {
  TwoBranchConfig cfg{.input_dim = 6, .trunk_hidden = 8, .d_input = 5, .d_output = 4, .embedding_dim = 3,
                      .num_classes = 3};
  TwoBranchNet net{cfg};
  ParamStore params;
  Tensor x;
  std::vector<int> labels{0, 1, 2, 1};
  Fixture() {
    std::mt19937_64 rng(12);
    net.init(params, rng);
    x = Tensor::randn(4, 6, 1.0, rng);
  }
};

}  // namespace

TEST(TwoBranch, LogitHeadDoesNotReachEmbedding) {
  Fixture f;
  Graph g1;
  auto a = f.net.forward(g1, f.params, g1.constant(f.x));
  ParamStore perturbed = f.params;
  for (auto& name : f.net.logit_head_params()) {
    for (auto& v : perturbed.at(name).storage()) v += 0.5;
  }
  Graph g2;
  auto b = f.net.forward(g2, perturbed, g2.constant(f.x));
  EXPECT_EQ(a.embedding.value().storage(), b.embedding.value().storage());
  EXPECT_NE(a.logits.value().storage(), b.logits.value().storage());
}

TEST(TwoBranch, ZeroTrunkGivesHeadBias) {
  Fixture f;
  for (auto& [name, t] : f.params) {
    if (name.rfind("net.trunk", 0) == 0) std::fill(t.storage().begin(), t.storage().end(), 0.0);
  }
  Graph g;
  auto out = f.net.forward(g, f.params, g.constant(f.x));
  // FC_2 of a zero trunk is its bias passed through the activation; the head maps that to fixed logits.
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.logits.value().at(r, c), out.logits.value().at(0, c));
  }
}

TEST(TwoBranch, GradientDataflowSeparation) {
  Fixture f;
  Graph g;
  auto out = f.net.forward(g, f.params, g.constant(f.x));
  auto soft = g.backward(softmax_cross_entropy(out.logits, f.labels));
  for (auto& name : f.net.metric_branch_params()) {
    for (double v : soft.at(name).storage()) EXPECT_EQ(v, 0.0) << name;
  }
  auto metric = g.backward(mean(square(out.embedding)));
  for (auto& name : f.net.logit_head_params()) {
    for (double v : metric.at(name).storage()) EXPECT_EQ(v, 0.0) << name;
  }
}

TEST(TwoBranch, JointObjectiveGradientMatchesFiniteDifferences) {
  Fixture f;
  auto build = [&](Graph& g, const ParamStore& p) {
    auto out = f.net.forward(g, p, g.constant(f.x));
    return joint_objective(softmax_cross_entropy(out.logits, f.labels), mean(square(out.embedding)),
                           JointWeights{1.0, 1.0});
  };
  EXPECT_LE(finite_difference_check(build, f.params).max_rel_error, 1e-5);
}

TEST(JointObjective, Examples) {
  EXPECT_DOUBLE_EQ(joint_objective(0.5, 0.25, {1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(joint_objective(0.5, 0.25, {1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(joint_objective(2.0, 4.0, {0.5, 0.5}), 3.0);
}
