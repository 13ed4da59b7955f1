#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace disent {

/// Joint distribution table q(z, s, y) over finite alphabets, z being either
/// x or a code d. s is a single categorical (a bit vector packed into one index).
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t nz, std::size_t ns, std::size_t ny);
  /// Table in z-major, then s, then y order; validated on construction.
  DiscreteJoint(std::size_t nz, std::size_t ns, std::size_t ny, std::vector<double> prob);

  std::size_t nz() const { return nz_; }
  std::size_t ns() const { return ns_; }
  std::size_t ny() const { return ny_; }
  double at(std::size_t z, std::size_t s, std::size_t y) const { return prob_[index(z, s, y)]; }
  double& at(std::size_t z, std::size_t s, std::size_t y) { return prob_[index(z, s, y)]; }
  const std::vector<double>& table() const { return prob_; }

  /// Nonnegative entries summing to 1 within 1e-12; throws ContractViolation otherwise.
  void validate() const;

  double marginal_z(std::size_t z) const;
  double joint_zy(std::size_t z, std::size_t y) const;
  double joint_zs(std::size_t z, std::size_t s) const;

 private:
  std::size_t index(std::size_t z, std::size_t s, std::size_t y) const {
    return (z * ns_ + s) * ny_ + y;
  }
  std::size_t nz_, ns_, ny_;
  std::vector<double> prob_;
};

/// q~(d,s,y) = sum over x with encoder[x] == d of q(x,s,y).
DiscreteJoint induced_joint(const DiscreteJoint& q, const std::vector<std::size_t>& encoder,
                            std::size_t nd);

/// Conditional table p(target | d); row d sums to 1.
struct Responder {
  std::size_t nd = 0;
  std::size_t nt = 0;
  std::vector<double> table;  // nd x nt
  double at(std::size_t d, std::size_t t) const { return table[d * nt + t]; }
};

struct Responders {
  Responder y;
  Responder s;
};

/// q~(y|d) and q~(s|d). A d with zero mass raises DegenerateSupportError.
Responders optimal_responders(const DiscreteJoint& q_tilde);

/// E_{q~}[-log p(y|d)] and E_{q~}[-log p(s|d)].
double expected_loss_y(const DiscreteJoint& q_tilde, const Responder& r);
double expected_loss_s(const DiscreteJoint& q_tilde, const Responder& r);

/// Conditional entropies in nats, 0 log 0 = 0.
double conditional_entropy_y(const DiscreteJoint& q_tilde);
double conditional_entropy_s(const DiscreteJoint& q_tilde);

/// H(y|d) - alpha * H(s|d).
double entropy_objective(const DiscreteJoint& q_tilde, double alpha_adv);

/// Total-variation distance between responder rows, maximized over d.
double max_row_tv(const Responder& a, const Responder& b);

/// Logit tables for each responder fit by gradient descent on the expected
/// cross-entropy under q~ with the encoder held fixed.
struct ResponderFitConfig {
  std::size_t iters = 5000;
  double lr = 0.5;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double init_stddev = 0.1;
};
Responders fit_responders_by_descent(const DiscreteJoint& q_tilde, const ResponderFitConfig& config = {});

struct SweepRow {
  double alpha = 0.0;
  double best_objective = 0.0;
  std::uint64_t encoder_id = 0;             // smallest id in the argmin set
  std::vector<std::uint64_t> argmin;        // ids within 1e-12 of the best
  bool stable = false;                      // argmin set equals every other alpha's
};

struct SweepReport {
  std::size_t nx = 0;
  std::size_t nd = 0;
  std::vector<SweepRow> rows;
  bool alpha_independent = false;
};

/// Encoder id <-> map: encoder[x] is digit x of the id in base nd.
std::vector<std::size_t> decode_encoder(std::uint64_t id, std::size_t nx, std::size_t nd);

/// Exhaustive search over all nd^nx deterministic encoders. More than
/// `budget` encoders raises SizeError.
SweepReport scenario_sweep(const DiscreteJoint& q, std::size_t nd, const std::vector<double>& alphas,
                           std::uint64_t budget = 1'000'000);

/// CSV: alpha,best_objective,encoder_id,argmin_stable
void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report);

}  // namespace disent
