#include "disent/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "disent/csv.hpp"
#include "disent/errors.hpp"
#include "disent/graph.hpp"
#include "disent/optim.hpp"

namespace disent {

namespace {

double plogp_sum(const std::vector<double>& joint, double marginal) {
  double h = 0.0;
  for (double p : joint) {
    if (p > 0.0) h -= p * std::log(p / marginal);
  }
  return h;
}

Responder conditional(const DiscreteJoint& q, bool target_y) {
  Responder r;
  r.nd = q.nz();
  r.nt = target_y ? q.ny() : q.ns();
  r.table.assign(r.nd * r.nt, 0.0);
  for (std::size_t d = 0; d < r.nd; ++d) {
    const double m = q.marginal_z(d);
    if (m <= 0.0) {
      throw DegenerateSupportError("code d=" + std::to_string(d) + " has zero probability");
    }
    for (std::size_t t = 0; t < r.nt; ++t) {
      r.table[d * r.nt + t] = (target_y ? q.joint_zy(d, t) : q.joint_zs(d, t)) / m;
    }
  }
  return r;
}

double expected_loss(const DiscreteJoint& q, const Responder& r, bool target_y) {
  const std::size_t nt = target_y ? q.ny() : q.ns();
  if (r.nd != q.nz() || r.nt != nt) throw ContractViolation("responder shape does not match the table");
  double loss = 0.0;
  for (std::size_t d = 0; d < q.nz(); ++d) {
    for (std::size_t t = 0; t < nt; ++t) {
      const double w = target_y ? q.joint_zy(d, t) : q.joint_zs(d, t);
      if (w == 0.0) continue;
      const double p = r.at(d, t);
      if (p <= 0.0) return std::numeric_limits<double>::infinity();
      loss -= w * std::log(p);
    }
  }
  return loss;
}

// Weighted log-likelihood of a row-softmax over `logits`, built from tape ops.
Var weighted_log_softmax_loss(Graph& g, Var logits, const Tensor& weights) {
  const std::size_t cols = logits.cols();
  Var row_sums = matmul(exp(logits), g.constant(Tensor({cols, 1}, 1.0)));
  Var log_norm = matmul(log(row_sums), g.constant(Tensor({1, cols}, 1.0)));
  return -sum(mul(g.constant(weights), logits - log_norm));
}

Responder softmax_rows(const Tensor& z) {
  Responder r;
  r.nd = z.rows();
  r.nt = z.cols();
  r.table.resize(z.size());
  for (std::size_t d = 0; d < r.nd; ++d) {
    double mx = z.at(d, 0);
    for (std::size_t t = 1; t < r.nt; ++t) mx = std::max(mx, z.at(d, t));
    double total = 0.0;
    for (std::size_t t = 0; t < r.nt; ++t) total += std::exp(z.at(d, t) - mx);
    for (std::size_t t = 0; t < r.nt; ++t) r.table[d * r.nt + t] = std::exp(z.at(d, t) - mx) / total;
  }
  return r;
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::size_t nz, std::size_t ns, std::size_t ny)
    : nz_(nz), ns_(ns), ny_(ny), prob_(nz * ns * ny, 0.0) {
  if (nz == 0 || ns == 0 || ny == 0) throw ContractViolation("DiscreteJoint: empty alphabet");
}

DiscreteJoint::DiscreteJoint(std::size_t nz, std::size_t ns, std::size_t ny, std::vector<double> prob)
    : DiscreteJoint(nz, ns, ny) {
  if (prob.size() != prob_.size()) {
    throw ContractViolation("DiscreteJoint: table has " + std::to_string(prob.size()) +
                            " entries, expected " + std::to_string(prob_.size()));
  }
  prob_ = std::move(prob);
  validate();
}

void DiscreteJoint::validate() const {
  double total = 0.0;
  for (double p : prob_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation("DiscreteJoint: negative or non-finite entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ContractViolation("DiscreteJoint: probabilities sum to " + format_double(total));
  }
}

double DiscreteJoint::marginal_z(std::size_t z) const {
  double m = 0.0;
  for (std::size_t s = 0; s < ns_; ++s) {
    for (std::size_t y = 0; y < ny_; ++y) m += at(z, s, y);
  }
  return m;
}

double DiscreteJoint::joint_zy(std::size_t z, std::size_t y) const {
  double m = 0.0;
  for (std::size_t s = 0; s < ns_; ++s) m += at(z, s, y);
  return m;
}

double DiscreteJoint::joint_zs(std::size_t z, std::size_t s) const {
  double m = 0.0;
  for (std::size_t y = 0; y < ny_; ++y) m += at(z, s, y);
  return m;
}

DiscreteJoint induced_joint(const DiscreteJoint& q, const std::vector<std::size_t>& encoder,
                            std::size_t nd) {
  if (encoder.size() != q.nz()) throw ContractViolation("encoder must map every x");
  DiscreteJoint out(nd, q.ns(), q.ny());
  for (std::size_t x = 0; x < q.nz(); ++x) {
    const std::size_t d = encoder[x];
    if (d >= nd) throw ContractViolation("encoder maps x=" + std::to_string(x) + " outside the d-alphabet");
    for (std::size_t s = 0; s < q.ns(); ++s) {
      for (std::size_t y = 0; y < q.ny(); ++y) out.at(d, s, y) += q.at(x, s, y);
    }
  }
  return out;
}

Responders optimal_responders(const DiscreteJoint& q_tilde) {
  return {conditional(q_tilde, true), conditional(q_tilde, false)};
}

double expected_loss_y(const DiscreteJoint& q_tilde, const Responder& r) {
  return expected_loss(q_tilde, r, true);
}

double expected_loss_s(const DiscreteJoint& q_tilde, const Responder& r) {
  return expected_loss(q_tilde, r, false);
}

double conditional_entropy_y(const DiscreteJoint& q) {
  double h = 0.0;
  for (std::size_t d = 0; d < q.nz(); ++d) {
    const double m = q.marginal_z(d);
    if (m <= 0.0) continue;
    std::vector<double> row(q.ny());
    for (std::size_t y = 0; y < q.ny(); ++y) row[y] = q.joint_zy(d, y);
    h += plogp_sum(row, m);
  }
  return h;
}

double conditional_entropy_s(const DiscreteJoint& q) {
  double h = 0.0;
  for (std::size_t d = 0; d < q.nz(); ++d) {
    const double m = q.marginal_z(d);
    if (m <= 0.0) continue;
    std::vector<double> row(q.ns());
    for (std::size_t s = 0; s < q.ns(); ++s) row[s] = q.joint_zs(d, s);
    h += plogp_sum(row, m);
  }
  return h;
}

double entropy_objective(const DiscreteJoint& q_tilde, double alpha_adv) {
  return conditional_entropy_y(q_tilde) - alpha_adv * conditional_entropy_s(q_tilde);
}

double max_row_tv(const Responder& a, const Responder& b) {
  if (a.nd != b.nd || a.nt != b.nt) throw ContractViolation("max_row_tv: shape mismatch");
  double worst = 0.0;
  for (std::size_t d = 0; d < a.nd; ++d) {
    double tv = 0.0;
    for (std::size_t t = 0; t < a.nt; ++t) tv += std::abs(a.at(d, t) - b.at(d, t));
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

Responders fit_responders_by_descent(const DiscreteJoint& q, const ResponderFitConfig& config) {
  Tensor wy({q.nz(), q.ny()}), ws({q.nz(), q.ns()});
  for (std::size_t d = 0; d < q.nz(); ++d) {
    for (std::size_t y = 0; y < q.ny(); ++y) wy.at(d, y) = q.joint_zy(d, y);
    for (std::size_t s = 0; s < q.ns(); ++s) ws.at(d, s) = q.joint_zs(d, s);
  }
  std::mt19937_64 rng(config.seed);
  ParamStore params;
  params.emplace("C_d.logits", Tensor::randn(q.nz(), q.ny(), config.init_stddev, rng));
  params.emplace("Dis.logits", Tensor::randn(q.nz(), q.ns(), config.init_stddev, rng));
  SgdMomentum opt({config.lr, config.momentum, 0.0});
  for (std::size_t it = 0; it < config.iters; ++it) {
    Graph g;
    Var loss = weighted_log_softmax_loss(g, g.parameter(params, "C_d.logits"), wy) +
               weighted_log_softmax_loss(g, g.parameter(params, "Dis.logits"), ws);
    opt.step(params, g.backward(loss));
  }
  return {softmax_rows(params.at("C_d.logits")), softmax_rows(params.at("Dis.logits"))};
}

std::vector<std::size_t> decode_encoder(std::uint64_t id, std::size_t nx, std::size_t nd) {
  std::vector<std::size_t> enc(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    enc[x] = static_cast<std::size_t>(id % nd);
    id /= nd;
  }
  return enc;
}

SweepReport scenario_sweep(const DiscreteJoint& q, std::size_t nd, const std::vector<double>& alphas,
                           std::uint64_t budget) {
  if (nd == 0) throw ContractViolation("scenario_sweep: empty d-alphabet");
  if (alphas.empty()) throw ContractViolation("scenario_sweep: no alpha values");
  std::uint64_t count = 1;
  for (std::size_t x = 0; x < q.nz(); ++x) {
    if (count > budget / nd) {
      throw SizeError("scenario_sweep: " + std::to_string(nd) + "^" + std::to_string(q.nz()) +
                      " encoders exceed the budget of " + std::to_string(budget));
    }
    count *= nd;
  }

  // Entropies do not depend on alpha, so compute them once per encoder.
  std::vector<double> hy(count), hs(count);
  for (std::uint64_t id = 0; id < count; ++id) {
    const auto qt = induced_joint(q, decode_encoder(id, q.nz(), nd), nd);
    hy[id] = conditional_entropy_y(qt);
    hs[id] = conditional_entropy_s(qt);
  }

  SweepReport report;
  report.nx = q.nz();
  report.nd = nd;
  for (double alpha : alphas) {
    SweepRow row;
    row.alpha = alpha;
    row.best_objective = std::numeric_limits<double>::infinity();
    for (std::uint64_t id = 0; id < count; ++id) {
      row.best_objective = std::min(row.best_objective, hy[id] - alpha * hs[id]);
    }
    for (std::uint64_t id = 0; id < count; ++id) {
      if (hy[id] - alpha * hs[id] <= row.best_objective + 1e-12) row.argmin.push_back(id);
    }
    row.encoder_id = row.argmin.front();
    report.rows.push_back(std::move(row));
  }
  report.alpha_independent = true;
  for (auto& row : report.rows) {
    row.stable = std::all_of(report.rows.begin(), report.rows.end(),
                             [&](const SweepRow& other) { return other.argmin == row.argmin; });
    report.alpha_independent = report.alpha_independent && row.stable;
  }
  return report;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "alpha,best_objective,encoder_id,argmin_stable\n";
  for (const auto& r : report.rows) {
    out << format_double(r.alpha) << ',' << format_double(r.best_objective) << ',' << r.encoder_id
        << ',' << (r.stable ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace disent
