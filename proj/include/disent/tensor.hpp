#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace disent {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles.
///
/// Every graph operation works on rank-2 tensors (a scalar is 1x1); other
/// ranks are only carried through checkpoints.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor row(std::vector<double> data);
  static Tensor column(std::vector<double> data);
  static Tensor identity(std::size_t n);
  /// Entries drawn from N(0, stddev^2).
  static Tensor randn(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const {
    if (shape_.size() != 2) not_a_matrix();
    return shape_[0];
  }
  std::size_t cols() const {
    if (shape_.size() != 2) not_a_matrix();
    return shape_[1];
  }
  bool is_matrix() const { return shape_.size() == 2; }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  /// Value of a single-element tensor.
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  std::string shape_string() const;

 private:
  [[noreturn]] void not_a_matrix() const;
  Shape shape_;
  std::vector<double> data_;
};

/// Named parameter tensors. Ordered so that iteration (and everything
/// serialized from it) is deterministic.
using ParamStore = std::map<std::string, Tensor>;

/// Parameter name -> gradient of identical shape.
using GradientMap = std::map<std::string, Tensor>;

std::size_t shape_product(const Shape& shape);

}  // namespace disent
