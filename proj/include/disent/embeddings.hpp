#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "disent/graph.hpp"

namespace disent {

/// Counts embedding forward passes and pairwise distance evaluations.
struct CostCounter {
  std::int64_t input_passes = 0;
  std::int64_t distance_calculations = 0;
};

/// D(f1, f2) = (f1 - f2)^T M (f1 - f2) with M symmetric PSD.
class MahalanobisMetric {
 public:
  /// Euclidean (squared) distance in `dim` dimensions.
  static MahalanobisMetric identity(std::size_t dim);
  /// Validates symmetry (1e-12) and PSD (eigenvalues >= -1e-10).
  explicit MahalanobisMetric(Tensor matrix);

  const Tensor& matrix() const { return matrix_; }
  std::size_t dim() const { return matrix_.rows(); }
  bool is_identity() const { return identity_; }

 private:
  MahalanobisMetric(Tensor matrix, bool identity) : matrix_(std::move(matrix)), identity_(identity) {}
  Tensor matrix_;
  bool identity_ = false;
};

double mahalanobis_distance(std::span<const double> f1, std::span<const double> f2,
                            const MahalanobisMetric& metric);

/// Distances from every row of `rows` (R x d) to the single row `center`
/// (1 x d), as an R x 1 column. Adds R to `counter` when given.
Var mahalanobis_rows(Var rows, Var center, const MahalanobisMetric& metric,
                     CostCounter* counter = nullptr);

/// Fully connected stack with leaky-relu between layers.
/// Parameters are named `<prefix>.l<i>.W` (in x out) and `<prefix>.l<i>.b` (1 x out).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<std::size_t> dims, double slope = 0.2,
      bool activate_output = false);

  void init(ParamStore& params, std::mt19937_64& rng) const;
  Var forward(Graph& graph, const ParamStore& params, Var x) const;
  std::vector<std::string> param_names() const;

  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::vector<std::size_t> dims_;
  double slope_ = 0.2;
  bool activate_output_ = false;
};

/// Deterministic encoder pass outside of training.
Tensor encoder_forward(const Mlp& encoder, const ParamStore& params, const Tensor& x);

/// fc4 = P1^T fc2 + P2^T fc3, applied row-wise: rows(fc2) * P1 + rows(fc3) * P2.
Var connecting_layer(Var fc2, Var fc3, Var p1, Var p2);

struct TwoBranchConfig {
  std::size_t input_dim = 16;
  std::size_t trunk_hidden = 32;
  std::size_t d_input = 16;   // width of FC_2 and FC_3
  std::size_t d_output = 16;  // width of FC_4
  std::size_t embedding_dim = 8;
  std::size_t num_classes = 4;
  double slope = 0.2;
};

/// Shared trunk feeding an expression-classification branch (FC_2 -> logits)
/// and a metric branch (FC_3, connecting layer FC_4, FC_5 -> embedding).
class TwoBranchNet {
 public:
  explicit TwoBranchNet(TwoBranchConfig config);

  struct Output {
    Var logits;
    Var embedding;
    Var fc2;
    Var fc3;
    Var fc4;
  };

  void init(ParamStore& params, std::mt19937_64& rng) const;
  Output forward(Graph& graph, const ParamStore& params, Var x) const;
  std::vector<std::string> param_names() const;
  /// Parameters only the metric embedding depends on.
  std::vector<std::string> metric_branch_params() const;
  /// Parameters only the class logits depend on.
  std::vector<std::string> logit_head_params() const;
  const TwoBranchConfig& config() const { return config_; }

  static constexpr const char* kP1 = "net.P1";
  static constexpr const char* kP2 = "net.P2";

 private:
  TwoBranchConfig config_;
  Mlp trunk_;
  Mlp fc2_;
  Mlp ec_head_;
  Mlp fc3_;
  Mlp fc5_;
};

struct JointWeights {
  double w_softmax = 1.0;
  double w_metric = 1.0;
};

Var joint_objective(Var softmax_loss, Var metric_loss, const JointWeights& weights);
double joint_objective(double softmax_loss, double metric_loss, const JointWeights& weights);

}  // namespace disent
