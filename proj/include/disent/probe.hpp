#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "disent/flf.hpp"
#include "disent/synthdata.hpp"
#include "disent/tensor.hpp"

namespace disent {

/// Multinomial logistic regression on standardized features.
struct LogisticProbe {
  std::size_t num_classes = 0;
  std::vector<double> mean;     // training-split feature statistics
  std::vector<double> inv_std;
  Tensor W;                     // D x K
  Tensor b;                     // 1 x K
  std::size_t iterations = 0;
  double final_grad_norm = 0.0;

  std::vector<int> predict(const Tensor& features) const;
  double accuracy(const Tensor& features, const std::vector<int>& labels) const;
};

/// Full-batch gradient descent from zero on mean cross-entropy plus
/// (l2_weight/2)|W|^2, step 1/L with L the smoothness bound. Stops when the
/// gradient norm reaches 1e-6 or after `iters` steps. Labels are 0..K-1.
LogisticProbe train_logistic_probe(const Tensor& features, const std::vector<int>& labels,
                                   double l2_weight = 1e-3, std::size_t iters = 3000);

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct ProbeReport {
  double acc_y_given_d = 0.0;
  double acc_s_given_d = 0.0;  // mean over attribute bits
  double acc_y_given_l = 0.0;
  double acc_s_given_l = 0.0;
  double chance_y = 0.0;
  double chance_s = 0.0;                    // mean of the per-bit chances
  std::vector<double> chance_s_bits;        // max marginal of each bit on the test split
  std::vector<double> acc_s_given_d_bits;
  std::vector<double> acc_s_given_l_bits;

  std::string to_json() const;
};

struct ProbeConfig {
  double l2_weight = 1e-3;
  std::size_t iters = 3000;
};

/// Trains the four probes on encoded training rows and scores them on the test rows.
ProbeReport probe_accuracy_matrix(const FLFModel& model, const Dataset& dataset,
                                  const ProbeSplit& split, const ProbeConfig& config = {});

/// Same protocol on precomputed codes (rows aligned with `dataset`).
ProbeReport probe_codes(const Tensor& d, const Tensor& l, const Dataset& dataset,
                        const ProbeSplit& split, const ProbeConfig& config = {});

/// CSV: subject_id, y, s0..s{N-1}, d0.., l0..
void dump_embeddings(const FLFModel& model, const Dataset& dataset,
                     const std::filesystem::path& path);

}  // namespace disent
