#include "disent/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "disent/errors.hpp"

namespace disent {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive");
  }
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive");
  }
  if (shape_product(shape_) != data_.size()) {
    throw ContractViolation("tensor shape " + shape_string() + " does not match " +
                            std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::row(std::vector<double> data) {
  const auto n = data.size();
  return Tensor({1, n}, std::move(data));
}

Tensor Tensor::column(std::vector<double> data) {
  const auto n = data.size();
  return Tensor({n, 1}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::randn(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t({rows, cols});
  for (auto& v : t.data_) v = dist(rng);
  return t;
}

void Tensor::not_a_matrix() const {
  throw ContractViolation("expected a matrix, got shape " + shape_string());
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractViolation("item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ',';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace disent
