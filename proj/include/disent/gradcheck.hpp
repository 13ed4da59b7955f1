#pragma once

#include <functional>
#include <span>
#include <string>

#include "disent/graph.hpp"

namespace disent {

/// Builds a scalar loss on `graph`, registering its trainable inputs from
/// `params` with Graph::parameter. Must be deterministic.
using LossBuilder = std::function<Var(Graph& graph, const ParamStore& params)>;

struct GradCheckResult {
  /// max over coordinates of |analytic - numeric| / max(1, |numeric|)
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients against central differences
/// (f(theta+h) - f(theta-h)) / 2h for every coordinate of every trainable leaf.
GradCheckResult finite_difference_check(const LossBuilder& build, const ParamStore& params,
                                        double h = 1e-5);

/// Same check for a plain function of a flat vector with a supplied gradient.
GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> point,
                                        std::span<const double> analytic, double h = 1e-5);

}  // namespace disent
