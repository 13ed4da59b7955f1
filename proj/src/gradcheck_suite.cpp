#include "disent/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "disent/embeddings.hpp"
#include "disent/flf.hpp"
#include "disent/gradcheck.hpp"
#include "disent/metric_losses.hpp"

namespace disent {

namespace {

constexpr double kKinkMargin = 1e-3;

struct Instance {
  ParamStore params;
  LossBuilder build;
};

using Sampler = std::function<std::optional<Instance>(std::mt19937_64&)>;

struct Case {
  std::string name;
  Sampler sample;
};

Tensor uniform(std::size_t r, std::size_t c, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({r, c});
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

Tensor normal(std::size_t r, std::size_t c, std::mt19937_64& rng) { return Tensor::randn(r, c, 1.0, rng); }

// Contracts an arbitrary-shaped output to a scalar with fixed random weights.
Var contract(Graph& g, Var v, const Tensor& w) { return sum(mul(g.constant(w), v)); }

MahalanobisMetric random_metric(std::size_t d, std::mt19937_64& rng) {
  const Tensor L = normal(d, d, rng);
  Tensor M({d, d}, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) M.at(i, j) += L.at(k, i) * L.at(k, j) / static_cast<double>(d);
    }
    M.at(i, i) += 0.1;
  }
  return MahalanobisMetric(M);
}

// Unary op case: input drawn from [lo, hi] with random sign flips when `signed_input`.
Case unary_case(std::string name, std::function<Var(Var)> op, double lo, double hi, bool signed_input) {
  return {name, [=](std::mt19937_64& rng) -> std::optional<Instance> {
            Tensor a = uniform(3, 4, lo, hi, rng);
            if (signed_input) {
              std::bernoulli_distribution flip(0.5);
              for (auto& v : a.storage()) v = flip(rng) ? -v : v;
            }
            const Tensor w = normal(3, 4, rng);
            Instance in;
            in.params.emplace("a", a);
            in.build = [=](Graph& g, const ParamStore& p) { return contract(g, op(g.parameter(p, "a")), w); };
            return in;
          }};
}

std::vector<Case> op_cases() {
  std::vector<Case> cases;
  cases.push_back({"op.matmul", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("a", normal(3, 4, rng));
                     in.params.emplace("b", normal(4, 2, rng));
                     const Tensor w = normal(3, 2, rng);
                     in.build = [w](Graph& g, const ParamStore& p) {
                       return contract(g, matmul(g.parameter(p, "a"), g.parameter(p, "b")), w);
                     };
                     return in;
                   }});
  const auto binary = [](std::string name, std::function<Var(Var, Var)> op, std::size_t br,
                         std::size_t bc) {
    return Case{name, [=](std::mt19937_64& rng) -> std::optional<Instance> {
                  Instance in;
                  in.params.emplace("a", normal(3, 4, rng));
                  in.params.emplace("b", normal(br, bc, rng));
                  const Tensor w = normal(3, 4, rng);
                  in.build = [=](Graph& g, const ParamStore& p) {
                    return contract(g, op(g.parameter(p, "a"), g.parameter(p, "b")), w);
                  };
                  return in;
                }};
  };
  cases.push_back(binary("op.add", [](Var a, Var b) { return add(a, b); }, 3, 4));
  cases.push_back(binary("op.broadcast_add", [](Var a, Var b) { return broadcast_add(a, b); }, 1, 4));
  cases.push_back(binary("op.mul", [](Var a, Var b) { return mul(a, b); }, 3, 4));
  cases.push_back(unary_case("op.scale", [](Var a) { return scale(a, -1.7); }, 0.1, 2.0, true));
  cases.push_back(unary_case("op.add_scalar", [](Var a) { return add_scalar(a, 0.3); }, 0.1, 2.0, true));
  cases.push_back({"op.transpose", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("a", normal(3, 4, rng));
                     const Tensor w = normal(4, 3, rng);
                     in.build = [w](Graph& g, const ParamStore& p) {
                       return contract(g, transpose(g.parameter(p, "a")), w);
                     };
                     return in;
                   }});
  cases.push_back(unary_case("op.relu", [](Var a) { return relu(a); }, 0.05, 2.0, true));
  cases.push_back(unary_case("op.leaky_relu", [](Var a) { return leaky_relu(a, 0.2); }, 0.05, 2.0, true));
  cases.push_back(unary_case("op.sigmoid", [](Var a) { return sigmoid(a); }, 0.0, 3.0, true));
  cases.push_back(unary_case("op.tanh", [](Var a) { return tanh(a); }, 0.0, 2.0, true));
  cases.push_back(unary_case("op.exp", [](Var a) { return exp(a); }, 0.0, 1.5, true));
  cases.push_back(unary_case("op.log", [](Var a) { return log(a); }, 0.5, 3.0, false));
  cases.push_back(unary_case("op.square", [](Var a) { return square(a); }, 0.0, 2.0, true));
  cases.push_back({"op.mean", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("a", normal(3, 4, rng));
                     // Square keeps the gradient input-dependent.
                     in.build = [](Graph& g, const ParamStore& p) { return square(mean(g.parameter(p, "a"))); };
                     return in;
                   }});
  cases.push_back({"op.sum", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("a", normal(3, 4, rng));
                     in.build = [](Graph& g, const ParamStore& p) { return square(sum(g.parameter(p, "a"))); };
                     return in;
                   }});
  for (std::size_t axis : {0u, 1u}) {
    cases.push_back({"op.concat_axis" + std::to_string(axis),
                     [axis](std::mt19937_64& rng) -> std::optional<Instance> {
                       Instance in;
                       in.params.emplace("a", normal(3, 2, rng));
                       in.params.emplace("b", normal(3, 2, rng));
                       const Tensor w = axis == 0 ? normal(6, 2, rng) : normal(3, 4, rng);
                       in.build = [axis, w](Graph& g, const ParamStore& p) {
                         return contract(g, concat(g.parameter(p, "a"), g.parameter(p, "b"), axis), w);
                       };
                       return in;
                     }});
    cases.push_back({"op.slice_axis" + std::to_string(axis),
                     [axis](std::mt19937_64& rng) -> std::optional<Instance> {
                       Instance in;
                       in.params.emplace("a", normal(4, 4, rng));
                       const Tensor w = axis == 0 ? normal(2, 4, rng) : normal(4, 2, rng);
                       in.build = [axis, w](Graph& g, const ParamStore& p) {
                         return contract(g, slice(g.parameter(p, "a"), axis, 1, 3), w);
                       };
                       return in;
                     }});
  }
  cases.push_back({"op.softmax_cross_entropy", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("z", normal(5, 3, rng));
                     std::uniform_int_distribution<int> label(0, 2);
                     std::vector<int> y(5);
                     for (auto& v : y) v = label(rng);
                     in.build = [y](Graph& g, const ParamStore& p) {
                       return softmax_cross_entropy(g.parameter(p, "z"), y);
                     };
                     return in;
                   }});
  cases.push_back({"op.binary_cross_entropy", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("z", normal(5, 2, rng));
                     in.params.emplace("t", uniform(5, 2, 0.0, 1.0, rng));
                     in.build = [](Graph& g, const ParamStore& p) {
                       return binary_cross_entropy(g.parameter(p, "z"), g.parameter(p, "t"));
                     };
                     return in;
                   }});
  cases.push_back({"op.squared_error", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("a", normal(3, 4, rng));
                     in.params.emplace("b", normal(3, 4, rng));
                     in.build = [](Graph& g, const ParamStore& p) {
                       return squared_error(g.parameter(p, "a"), g.parameter(p, "b"));
                     };
                     return in;
                   }});
  cases.push_back({"net.mlp", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     const Mlp mlp("mlp", {3, 5, 4, 2});
                     mlp.init(in.params, rng);
                     const Tensor x = normal(4, 3, rng);
                     const Tensor w = normal(4, 2, rng);
                     in.build = [=](Graph& g, const ParamStore& p) {
                       return contract(g, mlp.forward(g, p, g.constant(x)), w);
                     };
                     return in;
                   }});
  cases.push_back({"net.connecting_layer", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("fc2", normal(3, 4, rng));
                     in.params.emplace("fc3", normal(3, 4, rng));
                     in.params.emplace("P1", normal(4, 2, rng));
                     in.params.emplace("P2", normal(4, 2, rng));
                     const Tensor w = normal(3, 2, rng);
                     in.build = [w](Graph& g, const ParamStore& p) {
                       return contract(g, connecting_layer(g.parameter(p, "fc2"), g.parameter(p, "fc3"),
                                                           g.parameter(p, "P1"), g.parameter(p, "P2")),
                                       w);
                     };
                     return in;
                   }});
  return cases;
}

std::vector<Case> loss_cases() {
  constexpr std::size_t d = 3, M = 4, N = 3;
  std::vector<Case> cases;
  cases.push_back({"loss.triplet", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     for (const char* k : {"anchor", "pos", "neg"}) in.params.emplace(k, normal(1, d, rng));
                     const auto metric = random_metric(d, rng);
                     in.build = [metric](Graph& g, const ParamStore& p) {
                       return triplet_loss(g.parameter(p, "anchor"), g.parameter(p, "pos"),
                                           g.parameter(p, "neg"), 0.5, metric);
                     };
                     return in;
                   }});
  cases.push_back({"loss.n_plus_one_tuplet", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("query", normal(1, d, rng));
                     in.params.emplace("pos", normal(1, d, rng));
                     in.params.emplace("neg", normal(N, d, rng));
                     const auto metric = random_metric(d, rng);
                     in.build = [metric](Graph& g, const ParamStore& p) {
                       return n_plus_one_tuplet_loss(g.parameter(p, "query"), g.parameter(p, "pos"),
                                                     g.parameter(p, "neg"), 0.5, metric);
                     };
                     return in;
                   }});
  cases.push_back({"loss.coupled_clusters", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     const Tensor pos = normal(M, d, rng), neg = normal(N, d, rng);
                     const auto metric = MahalanobisMetric::identity(d);
                     // The nearest negative must be unambiguous under perturbation.
                     const Tensor c = positive_center(pos);
                     std::vector<double> dist(N, 0.0);
                     for (std::size_t j = 0; j < N; ++j) {
                       for (std::size_t k = 0; k < d; ++k) dist[j] += std::pow(neg.at(j, k) - c[k], 2);
                     }
                     std::sort(dist.begin(), dist.end());
                     if (dist[1] - dist[0] < kKinkMargin) return std::nullopt;
                     in.params.emplace("pos", pos);
                     in.params.emplace("neg", neg);
                     in.build = [metric](Graph& g, const ParamStore& p) {
                       return coupled_clusters_loss(g.parameter(p, "pos"), g.parameter(p, "neg"), 0.5, metric);
                     };
                     return in;
                   }});
  cases.push_back({"loss.tuple_clusters", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("pos", Tensor::randn(M, d, 0.6, rng));
                     in.params.emplace("neg", Tensor::randn(N, d, 0.8, rng));
                     const auto metric = random_metric(d, rng);
                     in.build = [metric](Graph& g, const ParamStore& p) {
                       return tuple_clusters_loss(g.parameter(p, "pos"), g.parameter(p, "neg"),
                                                  FixedThreshold{1.0, 0.5}, metric);
                     };
                     return in;
                   }});
  cases.push_back({"loss.tuple_clusters_mined_trainable_T",
                   [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     in.params.emplace("pos", Tensor::randn(M, d, 0.6, rng));
                     in.params.emplace("neg", Tensor::randn(N, d, 0.8, rng));
                     in.params.emplace("T", uniform(1, 1, 0.8, 1.5, rng));
                     const auto metric = MahalanobisMetric::identity(d);
                     const std::vector<bool> keep = {true, false, true, true};
                     in.build = [metric, keep](Graph& g, const ParamStore& p) {
                       TupleLossOptions opt;
                       opt.keep = keep;
                       opt.trainable_T = g.parameter(p, "T");
                       return tuple_clusters_loss(g.parameter(p, "pos"), g.parameter(p, "neg"),
                                                  FixedThreshold{1.0, 0.5}, metric, opt);
                     };
                     return in;
                   }});
  const auto adaptive_instance = [](std::mt19937_64& rng, Instance& in) {
    AdaptiveParams::random(d, 2, 2, 0.7, rng).store(in.params);
    in.params.emplace("pos", normal(M, d, rng));
    in.params.emplace("neg", normal(N, d, rng));
  };
  cases.push_back({"loss.combined_quadratic_h", [=](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     adaptive_instance(rng, in);
                     const Tensor w = normal(M, 1, rng);
                     in.build = [w](Graph& g, const ParamStore& p) {
                       Var pos = g.parameter(p, "pos");
                       return contract(g, combined_quadratic_h(pos, positive_center(pos), adaptive_parameters(g, p)), w);
                     };
                     return in;
                   }});
  cases.push_back({"loss.adaptive_tuple_clusters", [=](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     adaptive_instance(rng, in);
                     in.build = [](Graph& g, const ParamStore& p) {
                       TupleLossOptions opt;
                       opt.keep = {true, true, false, true};
                       return adaptive_tuple_clusters_loss(g.parameter(p, "pos"), g.parameter(p, "neg"),
                                                           adaptive_parameters(g, p), opt);
                     };
                     return in;
                   }});
  cases.push_back({"loss.two_branch_joint", [](std::mt19937_64& rng) -> std::optional<Instance> {
                     Instance in;
                     TwoBranchConfig cfg;
                     cfg.input_dim = 4;
                     cfg.trunk_hidden = 5;
                     cfg.d_input = 4;
                     cfg.d_output = 3;
                     cfg.embedding_dim = 3;
                     cfg.num_classes = 3;
                     const TwoBranchNet net(cfg);
                     net.init(in.params, rng);
                     const Tensor x = normal(1 + 3 + 2, 4, rng);
                     in.build = [net, x](Graph& g, const ParamStore& p) {
                       auto out = net.forward(g, p, g.constant(x));
                       Var softmax = softmax_cross_entropy(slice(out.logits, 0, 0, 1), {1});
                       Var metric = tuple_clusters_loss(slice(out.embedding, 0, 1, 4), slice(out.embedding, 0, 4, 6),
                                                        FixedThreshold{1.0, 0.5}, MahalanobisMetric::identity(3));
                       return joint_objective(softmax, metric, JointWeights{1.0, 1.0});
                     };
                     return in;
                   }});
  return cases;
}

std::vector<Case> flf_cases() {
  FLFConfig cfg;
  cfg.input_dim = 4;
  cfg.num_classes = 3;
  cfg.num_attrs = 2;
  cfg.dim_d = 2;
  cfg.dim_l = 2;
  cfg.hidden = 4;
  const auto make = [cfg](std::string name, std::function<Var(Graph&, const FLFModel&, Var, Var, const std::vector<int>&)> f) {
    return Case{name, [=](std::mt19937_64& rng) -> std::optional<Instance> {
                  const FLFModel model(cfg, rng());
                  const Tensor x = normal(5, cfg.input_dim, rng);
                  Tensor s({5, cfg.num_attrs});
                  std::bernoulli_distribution bit(0.5);
                  for (auto& v : s.storage()) v = bit(rng) ? 1.0 : 0.0;
                  std::uniform_int_distribution<int> label(0, static_cast<int>(cfg.num_classes) - 1);
                  std::vector<int> y(5);
                  for (auto& v : y) v = label(rng);
                  Instance in;
                  in.params = model.params();
                  in.build = [=](Graph& g, const ParamStore& p) {
                    FLFModel m = model;
                    m.params() = p;
                    return f(g, m, g.constant(x), g.constant(s), y);
                  };
                  return in;
                }};
  };
  std::vector<Case> cases;
  cases.push_back(make("flf.loss_cd", [](Graph& g, const FLFModel& m, Var x, Var, const std::vector<int>& y) {
    return loss_cd(g, m, x, y);
  }));
  cases.push_back(make("flf.loss_dis", [](Graph& g, const FLFModel& m, Var x, Var s, const std::vector<int>&) {
    return loss_dis(g, m, x, s);
  }));
  cases.push_back(make("flf.loss_cl", [](Graph& g, const FLFModel& m, Var x, Var, const std::vector<int>& y) {
    return loss_cl(g, m, x, y);
  }));
  cases.push_back(make("flf.loss_rec", [](Graph& g, const FLFModel& m, Var x, Var s, const std::vector<int>&) {
    return loss_rec(g, m, x, s);
  }));
  cases.push_back(make("flf.objective_E_d", [](Graph& g, const FLFModel& m, Var x, Var s, const std::vector<int>& y) {
    return loss_cd(g, m, x, y) - 0.3 * loss_dis(g, m, x, s) + 0.1 * loss_rec(g, m, x, s);
  }));
  cases.push_back(make("flf.objective_E_l", [](Graph& g, const FLFModel& m, Var x, Var s, const std::vector<int>& y) {
    return -loss_cl(g, m, x, y) + 0.5 * loss_rec(g, m, x, s);
  }));
  return cases;
}

}  // namespace

GradSuiteReport run_gradcheck_suite(std::uint64_t seed, std::size_t points, double tolerance) {
  std::vector<Case> cases = op_cases();
  for (auto& c : loss_cases()) cases.push_back(std::move(c));
  for (auto& c : flf_cases()) cases.push_back(std::move(c));

  GradSuiteReport report;
  report.tolerance = tolerance;
  report.passed = true;
  std::mt19937_64 rng(seed);
  for (const auto& c : cases) {
    GradSuiteEntry entry;
    entry.name = c.name;
    while (entry.points < points) {
      if (entry.rejected > 1000 * points) break;
      auto inst = c.sample(rng);
      if (!inst) {
        ++entry.rejected;
        continue;
      }
      Graph probe;
      inst->build(probe, inst->params);
      if (probe.kink_margin() < kKinkMargin) {
        ++entry.rejected;
        continue;
      }
      const auto r = finite_difference_check(inst->build, inst->params);
      entry.max_rel_error = std::max(entry.max_rel_error, r.max_rel_error);
      ++entry.points;
    }
    entry.passed = entry.points == points && entry.max_rel_error <= tolerance;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace disent
