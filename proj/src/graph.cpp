#include "disent/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "disent/errors.hpp"

namespace disent {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

void require_matrix(const Tensor& t, std::string_view op) {
  require(t.is_matrix(), std::string(op) + ": operand must be a matrix, got " + t.shape_string());
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
}

void accumulate(std::vector<Tensor>& grads, std::size_t id, const Tensor& g) {
  auto& slot = grads[id];
  if (slot.size() == 0) {
    slot = g;
    return;
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out = a;
  for (auto& v : out.data()) v = f(v);
  return out;
}

double sigmoid_value(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// out[n,m] += a[n,k] * b[k,m]
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[n,k] += g[n,m] * b[k,m]^T
void gemm_nt(const Tensor& g, const Tensor& b, Tensor& out) {
  const std::size_t n = g.rows(), m = g.cols(), k = b.rows();
  const double* pg = g.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      const double* grow = pg + i * m;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
      po[i * k + p] += acc;
    }
  }
}

// out[k,m] += a[n,k]^T * g[n,m]
void gemm_tn(const Tensor& a, const Tensor& g, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = g.cols();
  const double* pa = a.data().data();
  const double* pg = g.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* grow = pg + i * m;
      double* orow = po + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kBroadcastAdd: return "broadcast_add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kRelu: return "relu";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kBinaryCrossEntropy: return "binary_cross_entropy";
    case OpKind::kSquaredError: return "squared_error";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::constant(Tensor value) {
  require_matrix(value, "constant");
  return push(OpKind::kLeaf, {}, std::move(value));
}

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) {
    return Var(this, it->second);
  }
  require_matrix(value, "parameter " + name);
  Var v = push(OpKind::kLeaf, {}, value);
  const bool frozen = std::any_of(frozen_.begin(), frozen_.end(),
                                  [&](const std::string& p) { return name.starts_with(p); });
  nodes_.back().trainable = !frozen;
  nodes_.back().needs_grad = !frozen;
  nodes_.back().name = name;
  param_ids_.emplace(name, v.id());
  return v;
}

Var Graph::parameter(const ParamStore& store, const std::string& name) {
  auto it = store.find(name);
  require(it != store.end(), "unknown parameter '" + name + "'");
  return parameter(name, it->second);
}

Var Graph::push(OpKind kind, std::vector<std::size_t> inputs, Tensor value, NodeAttr attr) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op_name(kind)) +
                       " at node " + std::to_string(nodes_.size()));
  }
  Node node;
  node.kind = kind;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.attr = std::move(attr);
  node.needs_grad = std::any_of(node.inputs.begin(), node.inputs.end(),
                                [&](std::size_t id) { return nodes_[id].needs_grad; });
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

double Graph::kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& node : nodes_) {
    if (node.kind != OpKind::kRelu && node.kind != OpKind::kLeakyRelu) continue;
    for (double v : nodes_[node.inputs[0]].value.data()) margin = std::min(margin, std::abs(v));
  }
  return margin;
}

GradientMap Graph::backward(Var output) const {
  require(&output.graph() == this, "backward: output belongs to another graph");
  const auto& out = nodes_.at(output.id()).value;
  require(out.size() == 1, "backward: output must be scalar, got shape " + out.shape_string());

  std::vector<Tensor> grads(nodes_.size());
  grads[output.id()] = Tensor(out.shape(), 1.0);
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].size() == 0 || !node.needs_grad) continue;
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient at node " + std::to_string(i) + " (" +
                         std::string(op_name(node.kind)) + ")");
    }
    if (node.kind != OpKind::kLeaf) backprop_node(node, grads[i], grads);
  }

  GradientMap result;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    if (!node.trainable) continue;
    if (grads[i].size() == 0) {
      result.emplace(node.name, Tensor(node.value.shape(), 0.0));
    } else {
      result.emplace(node.name, std::move(grads[i]));
    }
  }
  return result;
}

void Graph::backprop_node(const Node& node, const Tensor& g, std::vector<Tensor>& grads) const {
  const auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
  const std::size_t a_id = node.inputs.empty() ? 0 : node.inputs[0];
  const auto wants = [&](std::size_t id) { return nodes_[id].needs_grad; };
  const auto acc = [&](std::size_t id, const Tensor& t) {
    if (wants(id)) accumulate(grads, id, t);
  };

  switch (node.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      if (wants(a_id)) {
        Tensor ga(in(0).shape(), 0.0);
        gemm_nt(g, in(1), ga);
        accumulate(grads, a_id, ga);
      }
      if (wants(node.inputs[1])) {
        Tensor gb(in(1).shape(), 0.0);
        gemm_tn(in(0), g, gb);
        accumulate(grads, node.inputs[1], gb);
      }
      break;
    }
    case OpKind::kAdd:
      acc(a_id, g);
      acc(node.inputs[1], g);
      break;
    case OpKind::kBroadcastAdd: {
      acc(a_id, g);
      Tensor gr(in(1).shape(), 0.0);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g.at(r, c);
      }
      acc(node.inputs[1], gr);
      break;
    }
    case OpKind::kMul: {
      Tensor ga = g;
      Tensor gb = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] *= in(1)[i];
        gb[i] *= in(0)[i];
      }
      acc(a_id, ga);
      acc(node.inputs[1], gb);
      break;
    }
    case OpKind::kScale:
      acc(a_id, map_values(g, [k = node.attr.scalar](double v) { return v * k; }));
      break;
    case OpKind::kAddScalar:
      acc(a_id, g);
      break;
    case OpKind::kTranspose: {
      Tensor gt({g.cols(), g.rows()});
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gt.at(c, r) = g.at(r, c);
      }
      acc(a_id, gt);
      break;
    }
    case OpKind::kRelu: {
      Tensor ga = g;
      // Subgradient 0 at the kink.
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = in(0)[i] > 0.0 ? g[i] : 0.0;
      acc(a_id, ga);
      break;
    }
    case OpKind::kLeakyRelu: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] = in(0)[i] > 0.0 ? g[i] : node.attr.scalar * g[i];
      }
      acc(a_id, ga);
      break;
    }
    case OpKind::kSigmoid: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = node.value[i];
        ga[i] *= s * (1.0 - s);
      }
      acc(a_id, ga);
      break;
    }
    case OpKind::kTanh: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = node.value[i];
        ga[i] *= 1.0 - t * t;
      }
      acc(a_id, ga);
      break;
    }
    case OpKind::kExp: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] *= node.value[i];
      acc(a_id, ga);
      break;
    }
    case OpKind::kLog: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] /= in(0)[i];
      acc(a_id, ga);
      break;
    }
    case OpKind::kSquare: {
      Tensor ga = g;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] *= 2.0 * in(0)[i];
      acc(a_id, ga);
      break;
    }
    case OpKind::kMean:
      acc(a_id, Tensor(in(0).shape(), g.item() / static_cast<double>(in(0).size())));
      break;
    case OpKind::kSum:
      acc(a_id, Tensor(in(0).shape(), g.item()));
      break;
    case OpKind::kConcat: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor ga(a.shape());
      Tensor gb(b.shape());
      if (node.attr.axis == 0) {
        std::copy_n(g.data().begin(), a.size(), ga.data().begin());
        std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(a.size()), b.size(),
                    gb.data().begin());
      } else {
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < a.cols(); ++c) ga.at(r, c) = g.at(r, c);
          for (std::size_t c = 0; c < b.cols(); ++c) gb.at(r, c) = g.at(r, a.cols() + c);
        }
      }
      acc(a_id, ga);
      acc(node.inputs[1], gb);
      break;
    }
    case OpKind::kSlice: {
      Tensor ga(in(0).shape(), 0.0);
      const auto begin = node.attr.begin;
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          if (node.attr.axis == 0) {
            ga.at(begin + r, c) = g.at(r, c);
          } else {
            ga.at(r, begin + c) = g.at(r, c);
          }
        }
      }
      acc(a_id, ga);
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor& z = in(0);
      const std::size_t rows = z.rows(), cols = z.cols();
      Tensor ga(z.shape());
      const double k = g.item() / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        double mx = z.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, z.at(r, c));
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(z.at(r, c) - mx);
        for (std::size_t c = 0; c < cols; ++c) {
          const double p = std::exp(z.at(r, c) - mx) / total;
          const double onehot = static_cast<int>(c) == node.attr.labels[r] ? 1.0 : 0.0;
          ga.at(r, c) = k * (p - onehot);
        }
      }
      acc(a_id, ga);
      break;
    }
    case OpKind::kBinaryCrossEntropy: {
      const Tensor& z = in(0);
      const Tensor& t = in(1);
      Tensor ga(z.shape());
      const double k = g.item() / static_cast<double>(z.rows());
      for (std::size_t i = 0; i < z.size(); ++i) ga[i] = k * (sigmoid_value(z[i]) - t[i]);
      acc(a_id, ga);
      if (wants(node.inputs[1])) acc(node.inputs[1], map_values(z, [k](double v) { return -k * v; }));
      break;
    }
    case OpKind::kSquaredError: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor ga(a.shape());
      const double k = 2.0 * g.item() / static_cast<double>(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] = k * (a[i] - b[i]);
      acc(a_id, ga);
      acc(node.inputs[1], map_values(ga, [](double v) { return -v; }));
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Op builders

namespace {

Graph& same_graph(Var a, Var b, std::string_view op) {
  require(&a.graph() == &b.graph(), std::string(op) + ": operands from different graphs");
  return a.graph();
}

Var unary(Var a, OpKind kind, double (*f)(double)) {
  return a.graph().push(kind, {a.id()}, map_values(a.value(), f));
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  require(x.cols() == y.rows(),
          "matmul: inner dimensions differ " + x.shape_string() + " x " + y.shape_string());
  Tensor out({x.rows(), y.cols()}, 0.0);
  gemm_nn(x, y, out);
  return g.push(OpKind::kMatMul, {a.id(), b.id()}, std::move(out));
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return g.push(OpKind::kAdd, {a.id(), b.id()}, std::move(out));
}

Var broadcast_add(Var a, Var row) {
  Graph& g = same_graph(a, row, "broadcast_add");
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  require_matrix(x, "broadcast_add");
  require(r.is_matrix() && r.rows() == 1 && r.cols() == x.cols(),
          "broadcast_add: row shape " + r.shape_string() + " does not fit " + x.shape_string());
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(i, c) += r[c];
  }
  return g.push(OpKind::kBroadcastAdd, {a.id(), row.id()}, std::move(out));
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return g.push(OpKind::kMul, {a.id(), b.id()}, std::move(out));
}

Var scale(Var a, double factor) {
  NodeAttr attr;
  attr.scalar = factor;
  return a.graph().push(OpKind::kScale, {a.id()},
                        map_values(a.value(), [factor](double v) { return v * factor; }),
                        std::move(attr));
}

Var add_scalar(Var a, double offset) {
  NodeAttr attr;
  attr.scalar = offset;
  return a.graph().push(OpKind::kAddScalar, {a.id()},
                        map_values(a.value(), [offset](double v) { return v + offset; }),
                        std::move(attr));
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_matrix(x, "transpose");
  Tensor out({x.cols(), x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
  }
  return a.graph().push(OpKind::kTranspose, {a.id()}, std::move(out));
}

Var relu(Var a) {
  return unary(a, OpKind::kRelu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  NodeAttr attr;
  attr.scalar = slope;
  return a.graph().push(OpKind::kLeakyRelu, {a.id()},
                        map_values(a.value(), [slope](double v) { return v > 0.0 ? v : slope * v; }),
                        std::move(attr));
}

Var sigmoid(Var a) { return unary(a, OpKind::kSigmoid, sigmoid_value); }
Var tanh(Var a) { return unary(a, OpKind::kTanh, [](double v) { return std::tanh(v); }); }
Var exp(Var a) { return unary(a, OpKind::kExp, [](double v) { return std::exp(v); }); }
Var log(Var a) { return unary(a, OpKind::kLog, [](double v) { return std::log(v); }); }
Var square(Var a) { return unary(a, OpKind::kSquare, [](double v) { return v * v; }); }

Var mean(Var a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data()) total += v;
  return a.graph().push(OpKind::kMean, {a.id()},
                        Tensor::scalar(total / static_cast<double>(x.size())));
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph().push(OpKind::kSum, {a.id()}, Tensor::scalar(total));
}

Var concat(Var a, Var b, std::size_t axis) {
  Graph& g = same_graph(a, b, "concat");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "concat");
  require_matrix(y, "concat");
  require(axis <= 1, "concat: axis must be 0 or 1");
  NodeAttr attr;
  attr.axis = axis;
  if (axis == 0) {
    require(x.cols() == y.cols(), "concat rows: column counts differ");
    std::vector<double> data(x.data().begin(), x.data().end());
    data.insert(data.end(), y.data().begin(), y.data().end());
    return g.push(OpKind::kConcat, {a.id(), b.id()},
                  Tensor::matrix(x.rows() + y.rows(), x.cols(), std::move(data)), std::move(attr));
  }
  require(x.rows() == y.rows(), "concat cols: row counts differ");
  Tensor out({x.rows(), x.cols() + y.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) out.at(r, x.cols() + c) = y.at(r, c);
  }
  return g.push(OpKind::kConcat, {a.id(), b.id()}, std::move(out), std::move(attr));
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix(x, "slice");
  require(axis <= 1, "slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  require(begin < end && end <= extent, "slice: range [" + std::to_string(begin) + "," +
                                            std::to_string(end) + ") out of bounds for " +
                                            x.shape_string());
  Tensor out(axis == 0 ? Shape{end - begin, x.cols()} : Shape{x.rows(), end - begin});
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.at(r, c) = axis == 0 ? x.at(begin + r, c) : x.at(r, begin + c);
    }
  }
  NodeAttr attr;
  attr.axis = axis;
  attr.begin = begin;
  attr.end = end;
  return a.graph().push(OpKind::kSlice, {a.id()}, std::move(out), std::move(attr));
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Tensor& z = logits.value();
  require_matrix(z, "softmax_cross_entropy");
  require(labels.size() == z.rows(), "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                         " labels for " + std::to_string(z.rows()) + " rows");
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < z.cols(),
            "softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    double mx = z.at(r, 0);
    for (std::size_t c = 1; c < z.cols(); ++c) mx = std::max(mx, z.at(r, c));
    double acc = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) acc += std::exp(z.at(r, c) - mx);
    total += mx + std::log(acc) - z.at(r, static_cast<std::size_t>(y));
  }
  NodeAttr attr;
  attr.labels = labels;
  return logits.graph().push(OpKind::kSoftmaxCrossEntropy, {logits.id()},
                             Tensor::scalar(total / static_cast<double>(z.rows())),
                             std::move(attr));
}

Var binary_cross_entropy(Var logits, Var targets) {
  Graph& g = same_graph(logits, targets, "binary_cross_entropy");
  const Tensor& z = logits.value();
  const Tensor& t = targets.value();
  require_matrix(z, "binary_cross_entropy");
  require_same_shape(z, t, "binary_cross_entropy");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // softplus(z) - t*z == -[t log sigmoid(z) + (1-t) log(1-sigmoid(z))]
    total += std::max(z[i], 0.0) - t[i] * z[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return g.push(OpKind::kBinaryCrossEntropy, {logits.id(), targets.id()},
                Tensor::scalar(total / static_cast<double>(z.rows())));
}

Var squared_error(Var a, Var b) {
  Graph& g = same_graph(a, b, "squared_error");
  require_same_shape(a.value(), b.value(), "squared_error");
  double total = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    total += d * d;
  }
  return g.push(OpKind::kSquaredError, {a.id(), b.id()},
                Tensor::scalar(total / static_cast<double>(a.value().size())));
}

}  // namespace disent
