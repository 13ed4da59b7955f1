#include "disent/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "disent/errors.hpp"

namespace disent {

namespace {

double checked(double v, std::string_view where) {
  if (!std::isfinite(v)) {
    throw NumericError("loss not finite at probe point (" + std::string(where) + ")");
  }
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& build, const ParamStore& params,
                                        double h) {
  if (!(h > 0.0)) throw ContractViolation("finite_difference_check: step must be positive");

  GradientMap analytic;
  {
    Graph graph;
    Var out = build(graph, params);
    analytic = graph.backward(out);
  }

  const auto evaluate = [&](const ParamStore& probe) {
    Graph graph;
    return build(graph, probe).item();
  };

  GradCheckResult result;
  ParamStore probe = params;
  for (const auto& [name, grad] : analytic) {
    Tensor& theta = probe.at(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = checked(evaluate(probe), name);
      theta[i] = saved - h;
      const double down = checked(evaluate(probe), name);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(grad[i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> point,
                                        std::span<const double> analytic, double h) {
  if (!(h > 0.0)) throw ContractViolation("finite_difference_check: step must be positive");
  if (point.size() != analytic.size()) {
    throw ContractViolation("finite_difference_check: gradient length does not match point");
  }
  std::vector<double> x(point.begin(), point.end());
  GradCheckResult result;
  result.worst_param = "x";
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = checked(f(x), "x");
    x[i] = saved - h;
    const double down = checked(f(x), "x");
    x[i] = saved;
    const double err = relative_error(analytic[i], (up - down) / (2.0 * h));
    ++result.coordinates;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace disent
