#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "disent/tensor.hpp"

namespace disent {

struct Sample {
  int subject_id = 0;
  int class_y = 0;
  std::vector<int> attrs_s;         // each bit in {0,1}
  std::vector<double> latent_true;  // generator ground truth, not serialized
  std::vector<double> features_x;
};

struct Dataset {
  std::size_t num_classes = 0;
  std::size_t num_attrs = 0;
  std::size_t feature_dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  /// Rows of x for the given sample indices.
  Tensor features(std::span<const std::size_t> indices) const;
  Tensor features() const;
  std::vector<int> labels(std::span<const std::size_t> indices) const;
  /// 0/1 attribute matrix for the given indices.
  Tensor attributes(std::span<const std::size_t> indices) const;
};

/// Factor-controlled generator: x = M_y onehot(y) + M_s s + M_l l + noise.
struct FactorSpec {
  std::size_t num_classes = 5;   // K
  std::size_t num_attrs = 2;     // N
  std::size_t latent_dim = 4;
  std::size_t feature_dim = 16;  // D
  double noise_sigma = 0.1;
  /// Probability that an attribute bit is copied from bit i of y instead of
  /// drawn as an independent fair coin.
  double dependency_rho = 0.0;
  // Column scales of the three mixing matrices.
  double class_scale = 1.0;
  double attr_scale = 1.0;
  double latent_scale = 1.0;
};

Dataset gen_factor_dataset(const FactorSpec& spec, std::size_t n, std::uint64_t seed);

/// Subject/expression generator: x = subject offset + class offset + noise.
/// Subject offsets live in a random `subject_rank`-dimensional subspace.
struct IdentityExpressionSpec {
  std::size_t num_subjects = 20;
  std::size_t num_classes = 4;
  std::size_t feature_dim = 16;
  double noise_sigma = 0.3;
  std::size_t repetitions = 10; // samples per (subject, class)
  double subject_scale = 6.0;
  double class_scale = 1.0;
  std::size_t subject_rank = 3;
};

Dataset gen_identity_expression_dataset(const IdentityExpressionSpec& spec, std::uint64_t seed);

/// Partitions sample indices so each subject lands in exactly one fold.
std::vector<std::vector<std::size_t>> subject_independent_split(const Dataset& dataset,
                                                                std::size_t fold_count,
                                                                std::uint64_t seed);

/// Header `subject_id,y,s0..,x0..`; x written with 17 significant digits.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& dataset);
Dataset read_dataset_csv(const std::filesystem::path& path);
Dataset dataset_from_csv(const std::string& text);

/// Plug-in estimate of I(a; b) in nats from paired discrete observations.
double empirical_mutual_information(std::span<const int> a, std::span<const int> b);

}  // namespace disent
