#include "disent/embeddings.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "disent/errors.hpp"

namespace disent {

MahalanobisMetric MahalanobisMetric::identity(std::size_t dim) {
  return MahalanobisMetric(Tensor::identity(dim), true);
}

MahalanobisMetric::MahalanobisMetric(Tensor matrix) : matrix_(std::move(matrix)) {
  if (!matrix_.is_matrix() || matrix_.rows() != matrix_.cols()) {
    throw ContractViolation("Mahalanobis matrix must be square, got " + matrix_.shape_string());
  }
  const std::size_t d = matrix_.rows();
  Eigen::MatrixXd m(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      if (std::abs(matrix_.at(r, c) - matrix_.at(c, r)) > 1e-12) {
        throw ContractViolation("Mahalanobis matrix is not symmetric");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = matrix_.at(r, c);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw ContractViolation("Mahalanobis matrix is not positive semi-definite");
  }
  identity_ = matrix_.storage() == Tensor::identity(d).storage();
}

double mahalanobis_distance(std::span<const double> f1, std::span<const double> f2,
                            const MahalanobisMetric& metric) {
  const std::size_t d = metric.dim();
  if (f1.size() != d || f2.size() != d) {
    throw ContractViolation("mahalanobis_distance: dimensions " + std::to_string(f1.size()) + ", " +
                            std::to_string(f2.size()) + " do not match metric of size " +
                            std::to_string(d));
  }
  const Tensor& m = metric.matrix();
  double total = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    const double dr = f1[r] - f2[r];
    for (std::size_t c = 0; c < d; ++c) total += dr * m.at(r, c) * (f1[c] - f2[c]);
  }
  return total;
}

Var mahalanobis_rows(Var rows, Var center, const MahalanobisMetric& metric, CostCounter* counter) {
  const std::size_t d = metric.dim();
  if (rows.cols() != d || center.cols() != d || center.rows() != 1) {
    throw ContractViolation("mahalanobis_rows: expected R x " + std::to_string(d) +
                            " rows and a 1 x " + std::to_string(d) + " center");
  }
  Graph& g = rows.graph();
  Var diff = broadcast_add(rows, scale(center, -1.0));
  Var weighted = metric.is_identity() ? diff : matmul(diff, g.constant(metric.matrix()));
  Var dist = matmul(mul(weighted, diff), g.constant(Tensor({d, 1}, 1.0)));
  if (counter) counter->distance_calculations += static_cast<std::int64_t>(rows.rows());
  return dist;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::string prefix, std::vector<std::size_t> dims, double slope, bool activate_output)
    : prefix_(std::move(prefix)), dims_(std::move(dims)), slope_(slope),
      activate_output_(activate_output) {
  if (dims_.size() < 2) throw ContractViolation("Mlp needs at least input and output widths");
}

std::vector<std::string> Mlp::param_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    names.push_back(prefix_ + ".l" + std::to_string(i) + ".W");
    names.push_back(prefix_ + ".l" + std::to_string(i) + ".b");
  }
  return names;
}

void Mlp::init(ParamStore& params, std::mt19937_64& rng) const {
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    const auto stem = prefix_ + ".l" + std::to_string(i);
    const double stddev = std::sqrt(2.0 / static_cast<double>(dims_[i]));
    params.insert_or_assign(stem + ".W", Tensor::randn(dims_[i], dims_[i + 1], stddev, rng));
    params.insert_or_assign(stem + ".b", Tensor({1, dims_[i + 1]}, 0.0));
  }
}

Var Mlp::forward(Graph& graph, const ParamStore& params, Var x) const {
  if (x.cols() != input_dim()) {
    throw ContractViolation(prefix_ + ": input width " + std::to_string(x.cols()) +
                            " does not match " + std::to_string(input_dim()));
  }
  Var h = x;
  const std::size_t layers = dims_.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const auto stem = prefix_ + ".l" + std::to_string(i);
    h = broadcast_add(matmul(h, graph.parameter(params, stem + ".W")),
                      graph.parameter(params, stem + ".b"));
    if (i + 1 < layers || activate_output_) h = leaky_relu(h, slope_);
  }
  return h;
}

Tensor encoder_forward(const Mlp& encoder, const ParamStore& params, const Tensor& x) {
  Graph graph;
  return encoder.forward(graph, params, graph.constant(x)).value();
}

Var connecting_layer(Var fc2, Var fc3, Var p1, Var p2) {
  if (fc2.cols() != fc3.cols()) {
    throw ContractViolation("connecting_layer: FC_2 and FC_3 widths differ");
  }
  if (p1.rows() != fc2.cols() || p2.rows() != fc3.cols() || p1.cols() != p2.cols()) {
    throw ContractViolation("connecting_layer: P1 " + p1.value().shape_string() + " / P2 " +
                            p2.value().shape_string() + " do not conform");
  }
  return add(matmul(fc2, p1), matmul(fc3, p2));
}

// ---------------------------------------------------------------------------

TwoBranchNet::TwoBranchNet(TwoBranchConfig config)
    : config_(config),
      trunk_("net.trunk", {config.input_dim, config.trunk_hidden, config.trunk_hidden}, config.slope,
             true),
      fc2_("net.fc2", {config.trunk_hidden, config.d_input}, config.slope, true),
      ec_head_("net.ec_head", {config.d_input, config.num_classes}, config.slope),
      fc3_("net.fc3", {config.trunk_hidden, config.d_input}, config.slope, true),
      fc5_("net.fc5", {config.d_output, config.embedding_dim}, config.slope) {}

void TwoBranchNet::init(ParamStore& params, std::mt19937_64& rng) const {
  trunk_.init(params, rng);
  fc2_.init(params, rng);
  ec_head_.init(params, rng);
  fc3_.init(params, rng);
  const double stddev = std::sqrt(1.0 / static_cast<double>(2 * config_.d_input));
  params.insert_or_assign(kP1, Tensor::randn(config_.d_input, config_.d_output, stddev, rng));
  params.insert_or_assign(kP2, Tensor::randn(config_.d_input, config_.d_output, stddev, rng));
  fc5_.init(params, rng);
}

TwoBranchNet::Output TwoBranchNet::forward(Graph& graph, const ParamStore& params, Var x) const {
  Output out;
  Var shared = trunk_.forward(graph, params, x);
  out.fc2 = fc2_.forward(graph, params, shared);
  out.logits = ec_head_.forward(graph, params, out.fc2);
  out.fc3 = fc3_.forward(graph, params, shared);
  out.fc4 = connecting_layer(out.fc2, out.fc3, graph.parameter(params, kP1),
                             graph.parameter(params, kP2));
  out.embedding = fc5_.forward(graph, params, out.fc4);
  return out;
}

std::vector<std::string> TwoBranchNet::param_names() const {
  std::vector<std::string> names;
  for (const Mlp* m : {&trunk_, &fc2_, &ec_head_, &fc3_, &fc5_}) {
    auto part = m->param_names();
    names.insert(names.end(), part.begin(), part.end());
  }
  names.emplace_back(kP1);
  names.emplace_back(kP2);
  return names;
}

std::vector<std::string> TwoBranchNet::metric_branch_params() const {
  auto names = fc3_.param_names();
  auto tail = fc5_.param_names();
  names.insert(names.end(), tail.begin(), tail.end());
  names.emplace_back(kP1);
  names.emplace_back(kP2);
  return names;
}

std::vector<std::string> TwoBranchNet::logit_head_params() const { return ec_head_.param_names(); }

Var joint_objective(Var softmax_loss, Var metric_loss, const JointWeights& weights) {
  return add(scale(softmax_loss, weights.w_softmax), scale(metric_loss, weights.w_metric));
}

double joint_objective(double softmax_loss, double metric_loss, const JointWeights& weights) {
  return weights.w_softmax * softmax_loss + weights.w_metric * metric_loss;
}

}  // namespace disent
