#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "disent/embeddings.hpp"

namespace disent {

/// Reference distance T and margin tau, both on the squared-distance scale.
struct FixedThreshold {
  double T = 1.0;
  double tau = 0.5;

  /// Throws ContractViolation unless T > 0, tau > 0 and T > tau/2.
  void validate() const;
};

/// Factors of the combined quadratic H: A = L_A^T L_A (PSD), B = -L_B^T L_B (NSD).
struct AdaptiveParams {
  Tensor L_A;  // r_A x d
  Tensor L_B;  // r_B x d
  Tensor c;    // 1 x d
  Tensor b;    // 1 x 1

  static AdaptiveParams random(std::size_t dim, std::size_t rank_a, std::size_t rank_b,
                               double stddev, std::mt19937_64& rng);
  std::size_t dim() const { return L_A.cols(); }

  void store(ParamStore& params, const std::string& prefix = "adaptive") const;
  static AdaptiveParams load(const ParamStore& params, const std::string& prefix = "adaptive");
};

/// Graph handles for AdaptiveParams.
struct AdaptiveVars {
  Var L_A;
  Var L_B;
  Var c;
  Var b;
};

AdaptiveVars adaptive_parameters(Graph& graph, const ParamStore& params,
                                 const std::string& prefix = "adaptive");
AdaptiveVars adaptive_constants(Graph& graph, const AdaptiveParams& params);

/// Row mean, 1 x d.
Var positive_center(Var positives);
Tensor positive_center(const Tensor& positives);

Var triplet_loss(Var anchor, Var positive, Var negative, double tau,
                 const MahalanobisMetric& metric);
double triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                    double tau, const MahalanobisMetric& metric);

/// log(1 + sum_j exp(D(f,f+) + tau - D(f,f_j-))), evaluated with a max shift.
Var n_plus_one_tuplet_loss(Var query, Var positive, Var negatives, double tau,
                           const MahalanobisMetric& metric);
double n_plus_one_tuplet_loss(const Tensor& query, const Tensor& positive, const Tensor& negatives,
                              double tau, const MahalanobisMetric& metric);

/// Center-anchored triplet against the nearest negative, averaged over positives.
Var coupled_clusters_loss(Var positives, Var negatives, double tau,
                          const MahalanobisMetric& metric);
double coupled_clusters_loss(const Tensor& positives, const Tensor& negatives, double tau,
                             const MahalanobisMetric& metric);

struct TupleLossOptions {
  /// Which rows of `positives` survived mining; empty keeps all.
  std::vector<bool> keep;
  /// Anchor the loss at the mean of all positives rather than the kept ones.
  bool center_over_all = false;
  /// Trainable 1x1 reference distance replacing FixedThreshold::T.
  std::optional<Var> trainable_T;
  CostCounter* counter = nullptr;
};

/// (1/M*) sum_i max(0, D(f_i+, c+) - T + tau/2) + (1/N) sum_j max(0, T + tau/2 - D(f_j-, c+)).
Var tuple_clusters_loss(Var positives, Var negatives, const FixedThreshold& threshold,
                        const MahalanobisMetric& metric, const TupleLossOptions& options = {});
double tuple_clusters_loss(const Tensor& positives, const Tensor& negatives,
                           const FixedThreshold& threshold, const MahalanobisMetric& metric);

/// T(f1,f2) = 1/2 f1'Af1 + 1/2 f2'Af2 + f1'Bf2 + c'(f1+f2) + b for symmetric A~, B~.
double reference_distance(std::span<const double> f1, std::span<const double> f2,
                          const Tensor& A_tilde, const Tensor& B_tilde, std::span<const double> c,
                          double b);

/// H(f1,f2) = 1/2|L_A f1|^2 + 1/2|L_A f2|^2 - (L_B f1).(L_B f2) + c'(f1+f2) + b.
double combined_quadratic_h(std::span<const double> f1, std::span<const double> f2,
                            const AdaptiveParams& params);
/// H of every row of `rows` against the single row `center`, R x 1.
Var combined_quadratic_h(Var rows, Var center, const AdaptiveVars& params);

/// (1/(N+M*)) sum_k max(0, l_k H(f_k, c+) + 1) with l = -1 on positives, +1 on negatives.
Var adaptive_tuple_clusters_loss(Var positives, Var negatives, const AdaptiveVars& params,
                                 const TupleLossOptions& options = {});
double adaptive_tuple_clusters_loss(const Tensor& positives, const Tensor& negatives,
                                    const AdaptiveParams& params);

}  // namespace disent
