#pragma once

#include <cstdint>

#include "disent/tensor.hpp"

namespace disent {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// v <- mu*v + (g + wd*theta); theta <- theta - lr*v.
/// Only parameters present in the gradient map are touched.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig config = {}) : config_(config) {}

  void step(ParamStore& params, const GradientMap& grads);
  const SgdConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  SgdConfig config_;
  std::map<std::string, Tensor> velocity_;
  std::int64_t steps_ = 0;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Bias-corrected Adam. Only parameters present in the gradient map are touched.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore& params, const GradientMap& grads);
  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  AdamConfig config_;
  std::map<std::string, Tensor> first_moment_;
  std::map<std::string, Tensor> second_moment_;
  std::int64_t steps_ = 0;
};

}  // namespace disent
