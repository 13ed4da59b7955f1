#include "disent/optim.hpp"

#include <cmath>

#include "disent/errors.hpp"

namespace disent {

namespace {

Tensor& lookup(ParamStore& params, const std::string& name, const Tensor& grad) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractViolation("gradient for unknown parameter '" + name + "'");
  if (!it->second.same_shape(grad)) {
    throw ContractViolation("gradient shape " + grad.shape_string() + " does not match parameter '" +
                            name + "' of shape " + it->second.shape_string());
  }
  return it->second;
}

Tensor& buffer_for(std::map<std::string, Tensor>& buffers, const std::string& name,
                   const Tensor& like) {
  auto [it, inserted] = buffers.try_emplace(name, like.shape(), 0.0);
  return it->second;
}

}  // namespace

void SgdMomentum::step(ParamStore& params, const GradientMap& grads) {
  for (const auto& [name, grad] : grads) lookup(params, name, grad);
  ++steps_;
  for (const auto& [name, grad] : grads) {
    Tensor& theta = params.at(name);
    Tensor& v = buffer_for(velocity_, name, theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + config_.weight_decay * theta[i];
      v[i] = config_.momentum * v[i] + g;
      theta[i] -= config_.lr * v[i];
    }
  }
}

void Adam::step(ParamStore& params, const GradientMap& grads) {
  for (const auto& [name, grad] : grads) lookup(params, name, grad);
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (const auto& [name, grad] : grads) {
    Tensor& theta = params.at(name);
    Tensor& m = buffer_for(first_moment_, name, theta);
    Tensor& v = buffer_for(second_moment_, name, theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + config_.weight_decay * theta[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace disent
