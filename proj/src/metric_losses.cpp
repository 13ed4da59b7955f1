#include "disent/metric_losses.hpp"

#include <algorithm>
#include <cmath>

#include "disent/errors.hpp"

namespace disent {

namespace {

void require_rows(Var v, std::string_view what) {
  if (v.rows() < 1) throw ContractViolation(std::string(what) + " must be nonempty");
}

void require_same_dim(Var a, Var b, std::string_view op) {
  if (a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": embedding dimensions differ (" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
  }
}

// 1 x rows averaging row over the kept subset (or every row).
Tensor averaging_row(std::size_t rows, const std::vector<bool>& keep) {
  if (!keep.empty() && keep.size() != rows) {
    throw ContractViolation("keep mask length does not match positives");
  }
  std::size_t kept = 0;
  for (std::size_t i = 0; i < rows; ++i) kept += keep.empty() || keep[i];
  if (kept == 0) throw ContractViolation("at least one positive must be kept");
  Tensor w({1, rows}, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (keep.empty() || keep[i]) w[i] = 1.0 / static_cast<double>(kept);
  }
  return w;
}

std::size_t kept_count(std::size_t rows, const std::vector<bool>& keep) {
  if (keep.empty()) return rows;
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

Var center_for(Var positives, const TupleLossOptions& options) {
  Graph& g = positives.graph();
  const auto weights = options.center_over_all ? averaging_row(positives.rows(), {})
                                               : averaging_row(positives.rows(), options.keep);
  return matmul(g.constant(weights), positives);
}

Var row_sums(Var m) {
  return matmul(m, m.graph().constant(Tensor({m.cols(), 1}, 1.0)));
}

void require_symmetric(const Tensor& m, std::string_view name) {
  if (!m.is_matrix() || m.rows() != m.cols()) {
    throw ContractViolation(std::string(name) + " must be square");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = r + 1; c < m.cols(); ++c) {
      if (std::abs(m.at(r, c) - m.at(c, r)) > 1e-12) {
        throw ContractViolation(std::string(name) + " must be symmetric");
      }
    }
  }
}

}  // namespace

void FixedThreshold::validate() const {
  if (!(T > 0.0) || !(tau > 0.0) || !(T > tau / 2.0)) {
    throw ContractViolation("threshold needs T > 0, tau > 0 and T > tau/2");
  }
}

AdaptiveParams AdaptiveParams::random(std::size_t dim, std::size_t rank_a, std::size_t rank_b,
                                      double stddev, std::mt19937_64& rng) {
  AdaptiveParams p;
  p.L_A = Tensor::randn(rank_a, dim, stddev, rng);
  p.L_B = Tensor::randn(rank_b, dim, stddev, rng);
  p.c = Tensor::randn(1, dim, stddev, rng);
  p.b = Tensor::randn(1, 1, stddev, rng);
  return p;
}

void AdaptiveParams::store(ParamStore& params, const std::string& prefix) const {
  params.insert_or_assign(prefix + ".L_A", L_A);
  params.insert_or_assign(prefix + ".L_B", L_B);
  params.insert_or_assign(prefix + ".c", c);
  params.insert_or_assign(prefix + ".b", b);
}

AdaptiveParams AdaptiveParams::load(const ParamStore& params, const std::string& prefix) {
  return {params.at(prefix + ".L_A"), params.at(prefix + ".L_B"), params.at(prefix + ".c"),
          params.at(prefix + ".b")};
}

AdaptiveVars adaptive_parameters(Graph& graph, const ParamStore& params, const std::string& prefix) {
  return {graph.parameter(params, prefix + ".L_A"), graph.parameter(params, prefix + ".L_B"),
          graph.parameter(params, prefix + ".c"), graph.parameter(params, prefix + ".b")};
}

AdaptiveVars adaptive_constants(Graph& graph, const AdaptiveParams& params) {
  return {graph.constant(params.L_A), graph.constant(params.L_B), graph.constant(params.c),
          graph.constant(params.b)};
}

Var positive_center(Var positives) {
  require_rows(positives, "positive set");
  return matmul(positives.graph().constant(averaging_row(positives.rows(), {})), positives);
}

Tensor positive_center(const Tensor& positives) {
  Graph g;
  return positive_center(g.constant(positives)).value();
}

// ---------------------------------------------------------------------------

Var triplet_loss(Var anchor, Var positive, Var negative, double tau,
                 const MahalanobisMetric& metric) {
  Var d_pos = mahalanobis_rows(positive, anchor, metric);
  Var d_neg = mahalanobis_rows(negative, anchor, metric);
  return relu(add_scalar(d_pos - d_neg, tau));
}

double triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                    double tau, const MahalanobisMetric& metric) {
  Graph g;
  return triplet_loss(g.constant(anchor), g.constant(positive), g.constant(negative), tau, metric)
      .item();
}

Var n_plus_one_tuplet_loss(Var query, Var positive, Var negatives, double tau,
                           const MahalanobisMetric& metric) {
  require_rows(negatives, "negative set");
  Var d_pos = mahalanobis_rows(positive, query, metric);
  Var d_neg = mahalanobis_rows(negatives, query, metric);
  // z_j = D(f,f+) + tau - D(f,f_j-), as an N x 1 column.
  Var z = broadcast_add(scale(d_neg, -1.0), add_scalar(d_pos, tau));
  double shift = 0.0;
  for (double v : z.value().data()) shift = std::max(shift, v);
  // log(1 + sum exp z) = m + log(exp(-m) + sum exp(z - m)); m is a constant shift.
  Var shifted = sum(exp(add_scalar(z, -shift)));
  return add_scalar(log(add_scalar(shifted, std::exp(-shift))), shift);
}

double n_plus_one_tuplet_loss(const Tensor& query, const Tensor& positive, const Tensor& negatives,
                              double tau, const MahalanobisMetric& metric) {
  Graph g;
  return n_plus_one_tuplet_loss(g.constant(query), g.constant(positive), g.constant(negatives), tau,
                                metric)
      .item();
}

Var coupled_clusters_loss(Var positives, Var negatives, double tau,
                          const MahalanobisMetric& metric) {
  require_rows(negatives, "negative set");
  require_same_dim(positives, negatives, "coupled_clusters_loss");
  Var center = positive_center(positives);
  Var d_pos = mahalanobis_rows(positives, center, metric);
  Var d_neg = mahalanobis_rows(negatives, center, metric);
  const auto& dn = d_neg.value().storage();
  const auto nearest = static_cast<std::size_t>(std::min_element(dn.begin(), dn.end()) - dn.begin());
  Var d_nearest = slice(d_neg, 0, nearest, nearest + 1);
  return mean(relu(broadcast_add(add_scalar(d_pos, tau), scale(d_nearest, -1.0))));
}

double coupled_clusters_loss(const Tensor& positives, const Tensor& negatives, double tau,
                             const MahalanobisMetric& metric) {
  Graph g;
  return coupled_clusters_loss(g.constant(positives), g.constant(negatives), tau, metric).item();
}

Var tuple_clusters_loss(Var positives, Var negatives, const FixedThreshold& threshold,
                        const MahalanobisMetric& metric, const TupleLossOptions& options) {
  require_rows(positives, "positive set");
  require_rows(negatives, "negative set");
  require_same_dim(positives, negatives, "tuple_clusters_loss");
  threshold.validate();
  Graph& g = positives.graph();

  Var center = center_for(positives, options);
  Var d_pos = mahalanobis_rows(positives, center, metric, options.counter);
  Var d_neg = mahalanobis_rows(negatives, center, metric, options.counter);

  const double half_tau = threshold.tau / 2.0;
  Var pos_excess;
  Var neg_shortfall;
  if (options.trainable_T) {
    const Var T = *options.trainable_T;
    pos_excess = add_scalar(broadcast_add(d_pos, scale(T, -1.0)), half_tau);
    neg_shortfall = add_scalar(broadcast_add(scale(d_neg, -1.0), T), half_tau);
  } else {
    pos_excess = add_scalar(d_pos, half_tau - threshold.T);
    neg_shortfall = add_scalar(scale(d_neg, -1.0), threshold.T + half_tau);
  }
  Var pos_term = matmul(g.constant(averaging_row(positives.rows(), options.keep)), relu(pos_excess));
  Var neg_term = mean(relu(neg_shortfall));
  return add(pos_term, neg_term);
}

double tuple_clusters_loss(const Tensor& positives, const Tensor& negatives,
                           const FixedThreshold& threshold, const MahalanobisMetric& metric) {
  Graph g;
  return tuple_clusters_loss(g.constant(positives), g.constant(negatives), threshold, metric).item();
}

// ---------------------------------------------------------------------------

double reference_distance(std::span<const double> f1, std::span<const double> f2,
                          const Tensor& A_tilde, const Tensor& B_tilde, std::span<const double> c,
                          double b) {
  require_symmetric(A_tilde, "A~");
  require_symmetric(B_tilde, "B~");
  const std::size_t d = A_tilde.rows();
  if (f1.size() != d || f2.size() != d || c.size() != d || B_tilde.rows() != d) {
    throw ContractViolation("reference_distance: dimension mismatch");
  }
  double value = b;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t k = 0; k < d; ++k) {
      value += 0.5 * f1[r] * A_tilde.at(r, k) * f1[k] + 0.5 * f2[r] * A_tilde.at(r, k) * f2[k] +
               f1[r] * B_tilde.at(r, k) * f2[k];
    }
    value += c[r] * (f1[r] + f2[r]);
  }
  return value;
}

double combined_quadratic_h(std::span<const double> f1, std::span<const double> f2,
                            const AdaptiveParams& params) {
  const std::size_t d = params.dim();
  if (f1.size() != d || f2.size() != d) {
    throw ContractViolation("combined_quadratic_h: dimension mismatch");
  }
  Graph g;
  Var h = combined_quadratic_h(g.constant(Tensor::row({f1.begin(), f1.end()})),
                               g.constant(Tensor::row({f2.begin(), f2.end()})),
                               adaptive_constants(g, params));
  return h.item();
}

Var combined_quadratic_h(Var rows, Var center, const AdaptiveVars& params) {
  const std::size_t d = params.L_A.cols();
  if (rows.cols() != d || center.cols() != d || center.rows() != 1 || params.L_B.cols() != d ||
      params.c.cols() != d || params.c.rows() != 1 || params.b.value().size() != 1) {
    throw ContractViolation("combined_quadratic_h: parameter shapes do not conform");
  }
  Var la_t = transpose(params.L_A);
  Var lb_t = transpose(params.L_B);
  Var c_t = transpose(params.c);

  Var quad_rows = scale(row_sums(square(matmul(rows, la_t))), 0.5);    // R x 1
  Var quad_center = scale(sum(square(matmul(center, la_t))), 0.5);     // 1 x 1
  Var cross = matmul(matmul(rows, lb_t), transpose(matmul(center, lb_t)));  // R x 1
  Var lin_rows = matmul(rows, c_t);                                    // R x 1
  Var lin_center = matmul(center, c_t);                                // 1 x 1

  Var per_row = add(quad_rows, lin_rows) - cross;
  Var shared = add(add(quad_center, lin_center), params.b);
  return broadcast_add(per_row, shared);
}

Var adaptive_tuple_clusters_loss(Var positives, Var negatives, const AdaptiveVars& params,
                                 const TupleLossOptions& options) {
  require_rows(positives, "positive set");
  require_rows(negatives, "negative set");
  require_same_dim(positives, negatives, "adaptive_tuple_clusters_loss");
  Graph& g = positives.graph();

  Var center = center_for(positives, options);
  Var h_pos = combined_quadratic_h(positives, center, params);
  Var h_neg = combined_quadratic_h(negatives, center, params);
  if (options.counter) {
    options.counter->distance_calculations +=
        static_cast<std::int64_t>(positives.rows() + negatives.rows());
  }

  const std::size_t kept = kept_count(positives.rows(), options.keep);
  Tensor indicator({1, positives.rows()}, 0.0);
  for (std::size_t i = 0; i < positives.rows(); ++i) {
    if (options.keep.empty() || options.keep[i]) indicator[i] = 1.0;
  }
  // l = -1 on positives, +1 on negatives, margin 1.
  Var pos_hinge = matmul(g.constant(indicator), relu(add_scalar(scale(h_pos, -1.0), 1.0)));
  Var neg_hinge = sum(relu(add_scalar(h_neg, 1.0)));
  return scale(add(pos_hinge, neg_hinge), 1.0 / static_cast<double>(kept + negatives.rows()));
}

double adaptive_tuple_clusters_loss(const Tensor& positives, const Tensor& negatives,
                                    const AdaptiveParams& params) {
  Graph g;
  return adaptive_tuple_clusters_loss(g.constant(positives), g.constant(negatives),
                                      adaptive_constants(g, params))
      .item();
}

}  // namespace disent
