#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "disent/tensor.hpp"

namespace disent {

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kBroadcastAdd,  // matrix + 1xC row, row repeated over every matrix row
  kMul,
  kScale,
  kAddScalar,
  kTranspose,
  kRelu,
  kLeakyRelu,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSquare,
  kMean,
  kSum,
  kConcat,
  kSlice,
  kSoftmaxCrossEntropy,
  kBinaryCrossEntropy,
  kSquaredError,
};

std::string_view op_name(OpKind kind);

class Graph;

/// Non-tensor arguments of an op (slope, slice range, class labels, ...).
struct NodeAttr {
  double scalar = 0.0;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<int> labels;
};

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only tape of tensor operations with reverse-mode differentiation.
///
/// Values are computed eagerly as nodes are appended, so every node's inputs
/// precede it and the tape order is a topological order. Trainable leaves are
/// keyed by parameter name; registering the same name twice returns the
/// existing leaf so gradients accumulate into one entry.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(const std::string& name, const Tensor& value);
  /// Registers `name` from `store` as a trainable leaf.
  Var parameter(const ParamStore& store, const std::string& name);
  /// Parameters registered afterwards whose name starts with `prefix` enter
  /// the tape as constants and get no gradient entry.
  void freeze_prefix(std::string prefix) { frozen_.push_back(std::move(prefix)); }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }

  /// Smallest |input| over all relu and leaky_relu nodes (infinity if none);
  /// a point is away from every kink when this is comfortably positive.
  double kink_margin() const;

  /// Exact reverse-mode gradients of the scalar `output` w.r.t. every
  /// trainable leaf. Leaves the output does not depend on get zero tensors.
  GradientMap backward(Var output) const;

  // Used by the op builders below.
  Var push(OpKind kind, std::vector<std::size_t> inputs, Tensor value, NodeAttr attr = {});

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    NodeAttr attr;
    bool trainable = false;
    bool needs_grad = false;  // some trainable leaf lies upstream
    std::string name;
  };

  void backprop_node(const Node& node, const Tensor& grad, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
  std::vector<std::string> frozen_;
};

// Op builders. All operands must belong to the same graph.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// `row` must be 1xC; it is added to every row of the RxC matrix `a`.
Var broadcast_add(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var transpose(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// Mean over all entries, 1x1.
Var mean(Var a);
/// Sum over all entries, 1x1.
Var sum(Var a);
/// axis 0 stacks rows, axis 1 stacks columns.
Var concat(Var a, Var b, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// Batch mean of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
/// Sum over columns, mean over rows, of the Bernoulli negative log-likelihood
/// of `targets` under sigmoid(logits). Differentiable in both arguments.
Var binary_cross_entropy(Var logits, Var targets);
/// Mean over all entries of (a - b)^2.
Var squared_error(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator-(Var a, Var b) { return add(a, scale(b, -1.0)); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator*(Var a, double k) { return scale(a, k); }

}  // namespace disent
