#include "greg/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace greg::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Variable: return "variable";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Relu: return "relu";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Reciprocal: return "reciprocal";
    case Op::Sum: return "sum";
    case Op::SumRows: return "sum_rows";
    case Op::SumCols: return "sum_cols";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::Max: return "max";
    case Op::LogSumExp: return "logsumexp";
    case Op::Dot: return "dot";
    case Op::StopGradient: return "stop_gradient";
  }
  return "unknown";
}

namespace {

std::size_t arity(Op op) {
  switch (op) {
    case Op::Constant:
    case Op::Variable: return 0;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::MatMul:
    case Op::Dot: return 2;
    default: return 1;
  }
}

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(Op op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

Matrix row_logsumexp(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    out(r, 0) = m + std::log((a.row(r).array() - m).exp().sum());
  }
  return out;
}

}  // namespace

NodeId Graph::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("constant: non-finite value");
  nodes_.push_back(Node{Op::Constant, {}, {}, std::move(value), false});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), generation_};
}

NodeId Graph::variable(Matrix value) {
  if (!value.allFinite()) throw NumericError("variable: non-finite value");
  nodes_.push_back(Node{Op::Variable, {}, {}, std::move(value), true});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), generation_};
}

void Graph::check(NodeId id) const {
  if (id.generation != generation_ || id.index >= nodes_.size()) {
    throw InvalidArgument("stale or out-of-range node id " + std::to_string(id.index));
  }
}

const Node& Graph::node(NodeId id) const {
  check(id);
  return nodes_[id.index];
}

double Graph::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (v.size() != 1) throw ShapeError("expected a scalar node, got " + dims(v));
  return v(0, 0);
}

void Graph::truncate(std::size_t size) {
  if (size < nodes_.size()) nodes_.resize(size);
}

void Graph::clear() {
  nodes_.clear();
  ++generation_;
}

Matrix Graph::evaluate(Op op, std::span<const NodeId> parents, const OpAttr& attr) const {
  if (parents.size() != arity(op) || arity(op) == 0) {
    throw InvalidArgument(std::string(op_name(op)) + ": expected " + std::to_string(arity(op)) +
                          " parents, got " + std::to_string(parents.size()));
  }
  const Matrix& a = value(parents[0]);
  switch (op) {
    case Op::Add: {
      const Matrix& b = value(parents[1]);
      require_same_shape(op, a, b);
      return a + b;
    }
    case Op::Sub: {
      const Matrix& b = value(parents[1]);
      require_same_shape(op, a, b);
      return a - b;
    }
    case Op::Mul: {
      const Matrix& b = value(parents[1]);
      require_same_shape(op, a, b);
      return a.cwiseProduct(b);
    }
    case Op::Dot: {
      const Matrix& b = value(parents[1]);
      require_same_shape(op, a, b);
      return Matrix::Constant(1, 1, a.cwiseProduct(b).sum());
    }
    case Op::MatMul: {
      const Matrix& b = value(parents[1]);
      if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + dims(a) + " * " + dims(b));
      }
      return a * b;
    }
    case Op::Neg: return -a;
    case Op::Scale: return attr.value * a;
    case Op::Shift: return a.array() + attr.value;
    case Op::Transpose: return a.transpose();
    case Op::Relu: return a.cwiseMax(0.0);
    case Op::LeakyRelu: return (a.array() >= 0.0).select(a, attr.value * a);
    case Op::Exp: return a.array().exp();
    case Op::Log: return a.array().log();
    case Op::Sqrt: return a.array().sqrt();
    case Op::Reciprocal: return a.array().inverse();
    case Op::Sum: return Matrix::Constant(1, 1, a.sum());
    case Op::SumRows: return a.colwise().sum();
    case Op::SumCols: return a.rowwise().sum();
    case Op::BroadcastScalar:
      if (a.size() != 1) throw ShapeError("broadcast_scalar: source is " + dims(a));
      return Matrix::Constant(attr.rows, attr.cols, a(0, 0));
    case Op::BroadcastRows:
      if (a.rows() != 1) throw ShapeError("broadcast_rows: source is " + dims(a));
      return a.replicate(attr.rows, 1);
    case Op::BroadcastCols:
      if (a.cols() != 1) throw ShapeError("broadcast_cols: source is " + dims(a));
      return a.replicate(1, attr.cols);
    case Op::Max:
      if (a.cols() == 0) throw ShapeError("max: empty rows");
      return a.rowwise().maxCoeff();
    case Op::LogSumExp:
      if (a.cols() == 0) throw ShapeError("logsumexp: empty rows");
      return row_logsumexp(a);
    case Op::StopGradient: return a;
    case Op::Constant:
    case Op::Variable: break;
  }
  throw InvalidArgument("unknown op tag " + std::to_string(static_cast<int>(op)));
}

NodeId Graph::record(Op op, std::span<const NodeId> parents, OpAttr attr) {
  for (NodeId p : parents) check(p);
  Matrix value = evaluate(op, parents, attr);
  if (!value.allFinite()) {
    throw NumericError(std::string(op_name(op)) + ": produced a non-finite value");
  }
  bool requires_grad = false;
  if (op != Op::StopGradient) {
    for (NodeId p : parents) requires_grad = requires_grad || nodes_[p.index].requires_grad;
  }
  nodes_.push_back(Node{op, {parents.begin(), parents.end()}, attr, std::move(value), requires_grad});
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1), generation_};
}

void Graph::backward_rule(NodeId id, NodeId adjoint, const std::vector<bool>& needed,
                          std::vector<NodeId>& adjoints, std::vector<bool>& has_adjoint) {
  // Copy what we need: recording below may reallocate nodes_.
  const Op op = nodes_[id.index].op;
  const std::vector<NodeId> parents = nodes_[id.index].parents;
  const OpAttr attr = nodes_[id.index].attr;

  Graph& g = *this;
  const Var y(g, id);
  const Var gy(g, adjoint);

  auto accumulate = [&](std::size_t slot, const auto& make) {
    const NodeId p = parents[slot];
    if (!needed[p.index]) return;
    const Var contribution = make();
    if (has_adjoint[p.index]) {
      adjoints[p.index] = (Var(g, adjoints[p.index]) + contribution).id();
    } else {
      adjoints[p.index] = contribution.id();
      has_adjoint[p.index] = true;
    }
  };
  auto parent = [&](std::size_t slot) { return Var(g, parents[slot]); };

  switch (op) {
    case Op::Constant:
    case Op::Variable:
    case Op::StopGradient: break;
    case Op::Add:
      accumulate(0, [&] { return gy; });
      accumulate(1, [&] { return gy; });
      break;
    case Op::Sub:
      accumulate(0, [&] { return gy; });
      accumulate(1, [&] { return -gy; });
      break;
    case Op::Mul:
      accumulate(0, [&] { return gy * parent(1); });
      accumulate(1, [&] { return gy * parent(0); });
      break;
    case Op::Dot: {
      const Eigen::Index r = value(parents[0]).rows();
      const Eigen::Index c = value(parents[0]).cols();
      accumulate(0, [&] { return broadcast_scalar(gy, r, c) * parent(1); });
      accumulate(1, [&] { return broadcast_scalar(gy, r, c) * parent(0); });
      break;
    }
    case Op::MatMul:
      accumulate(0, [&] { return matmul(gy, transpose(parent(1))); });
      accumulate(1, [&] { return matmul(transpose(parent(0)), gy); });
      break;
    case Op::Neg: accumulate(0, [&] { return -gy; }); break;
    case Op::Scale: accumulate(0, [&] { return attr.value * gy; }); break;
    case Op::Shift: accumulate(0, [&] { return gy; }); break;
    case Op::Transpose: accumulate(0, [&] { return transpose(gy); }); break;
    case Op::Relu:
      accumulate(0, [&] {
        const Matrix& a = value(parents[0]);
        Matrix mask = (a.array() >= 0.0).cast<double>();
        return gy * ad::constant(g, std::move(mask));
      });
      break;
    case Op::LeakyRelu:
      accumulate(0, [&] {
        const Matrix& a = value(parents[0]);
        Matrix mask = (a.array() >= 0.0).select(Matrix::Ones(a.rows(), a.cols()),
                                                 Matrix::Constant(a.rows(), a.cols(), attr.value));
        return gy * ad::constant(g, std::move(mask));
      });
      break;
    case Op::Exp: accumulate(0, [&] { return gy * y; }); break;
    case Op::Log: accumulate(0, [&] { return gy * reciprocal(parent(0)); }); break;
    case Op::Sqrt: accumulate(0, [&] { return gy * (0.5 * reciprocal(y)); }); break;
    case Op::Reciprocal: accumulate(0, [&] { return gy * -(y * y); }); break;
    case Op::Sum: {
      const Matrix& a = value(parents[0]);
      const Eigen::Index r = a.rows(), c = a.cols();
      accumulate(0, [&] { return broadcast_scalar(gy, r, c); });
      break;
    }
    case Op::SumRows: {
      const Eigen::Index r = value(parents[0]).rows();
      accumulate(0, [&] { return broadcast_rows(gy, r); });
      break;
    }
    case Op::SumCols: {
      const Eigen::Index c = value(parents[0]).cols();
      accumulate(0, [&] { return broadcast_cols(gy, c); });
      break;
    }
    case Op::BroadcastScalar: accumulate(0, [&] { return sum(gy); }); break;
    case Op::BroadcastRows: accumulate(0, [&] { return sum_rows(gy); }); break;
    case Op::BroadcastCols: accumulate(0, [&] { return sum_cols(gy); }); break;
    case Op::Max:
      accumulate(0, [&] {
        const Matrix& a = value(parents[0]);
        const Eigen::Index c = a.cols();
        Matrix onehot = Matrix::Zero(a.rows(), c);
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          Eigen::Index arg = 0;
          a.row(r).maxCoeff(&arg);
          onehot(r, arg) = 1.0;
        }
        const Var spread = broadcast_cols(gy, c);
        return spread * ad::constant(g, std::move(onehot));
      });
      break;
    case Op::LogSumExp:
      accumulate(0, [&] {
        const Eigen::Index c = value(parents[0]).cols();
        const Var softmax = exp(parent(0) - broadcast_cols(y, c));
        return broadcast_cols(gy, c) * softmax;
      });
      break;
  }
}

std::vector<NodeId> Graph::gradient(NodeId output, std::span<const NodeId> wrt, bool create_graph) {
  check(output);
  for (NodeId w : wrt) check(w);
  if (value(output).size() != 1) {
    throw ShapeError("gradient: output must be scalar, got " + dims(value(output)));
  }
  for (NodeId w : wrt) {
    if (!nodes_[w.index].requires_grad) {
      throw InvalidArgument("gradient: node " + std::to_string(w.index) + " does not require grad");
    }
  }

  const std::size_t mark = nodes_.size();
  const std::size_t count = output.index + 1;

  // needed[i]: node i lies on a path from some wrt node.
  std::vector<bool> needed(count, false);
  for (NodeId w : wrt) {
    if (w.index < count) needed[w.index] = true;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (needed[i] || nodes_[i].op == Op::StopGradient) continue;
    for (NodeId p : nodes_[i].parents) {
      if (needed[p.index]) {
        needed[i] = true;
        break;
      }
    }
  }

  std::vector<NodeId> adjoints(count);
  std::vector<bool> has_adjoint(count, false);
  if (needed[output.index]) {
    adjoints[output.index] = constant(Matrix::Ones(1, 1));
    has_adjoint[output.index] = true;
  }
  for (std::size_t i = count; i-- > 0;) {
    if (!has_adjoint[i] || !needed[i]) continue;
    backward_rule(NodeId{static_cast<std::uint32_t>(i), generation_}, adjoints[i], needed, adjoints,
                  has_adjoint);
  }

  std::vector<NodeId> result;
  result.reserve(wrt.size());
  if (create_graph) {
    for (NodeId w : wrt) {
      if (w.index < count && has_adjoint[w.index]) {
        result.push_back(adjoints[w.index]);
      } else {
        const Matrix& v = nodes_[w.index].value;
        result.push_back(constant(Matrix::Zero(v.rows(), v.cols())));
      }
    }
    return result;
  }

  std::vector<Matrix> values;
  values.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w.index < count && has_adjoint[w.index]) {
      values.push_back(nodes_[adjoints[w.index].index].value);
    } else {
      const Matrix& v = nodes_[w.index].value;
      values.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  truncate(mark);
  for (Matrix& v : values) result.push_back(constant(std::move(v)));
  return result;
}

std::vector<Matrix> Graph::gradient_values(NodeId output, std::span<const NodeId> wrt) {
  const std::size_t mark = nodes_.size();
  std::vector<NodeId> ids = gradient(output, wrt, false);
  std::vector<Matrix> values;
  values.reserve(ids.size());
  for (NodeId id : ids) values.push_back(nodes_[id.index].value);
  truncate(mark);
  return values;
}

// ---------------------------------------------------------------------------
// Expression helpers

namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw InvalidArgument("operands belong to different graphs");
  return a.graph();
}

Var unary(Op op, Var a, OpAttr attr = {}) {
  return Var(a.graph(), a.graph().record(op, {a.id()}, attr));
}

Var binary(Op op, Var a, Var b) {
  Graph& g = same_graph(a, b);
  return Var(g, g.record(op, {a.id(), b.id()}));
}

}  // namespace

Var constant(Graph& g, Matrix value) { return Var(g, g.constant(std::move(value))); }
Var variable(Graph& g, Matrix value) { return Var(g, g.variable(std::move(value))); }
Var constant(Graph& g, double value) { return constant(g, Matrix::Constant(1, 1, value)); }

Var operator+(Var a, Var b) { return binary(Op::Add, a, b); }
Var operator-(Var a, Var b) { return binary(Op::Sub, a, b); }
Var operator*(Var a, Var b) { return binary(Op::Mul, a, b); }
Var operator-(Var a) { return unary(Op::Neg, a); }
Var operator*(double c, Var a) { return unary(Op::Scale, a, {c, 0, 0}); }
Var operator+(Var a, double c) { return unary(Op::Shift, a, {c, 0, 0}); }
Var operator-(Var a, double c) { return unary(Op::Shift, a, {-c, 0, 0}); }

Var matmul(Var a, Var b) { return binary(Op::MatMul, a, b); }
Var transpose(Var a) { return unary(Op::Transpose, a); }
Var relu(Var a) { return unary(Op::Relu, a); }
Var leaky_relu(Var a, double slope) { return unary(Op::LeakyRelu, a, {slope, 0, 0}); }
Var exp(Var a) { return unary(Op::Exp, a); }
Var log(Var a) { return unary(Op::Log, a); }
Var sqrt(Var a) { return unary(Op::Sqrt, a); }
Var reciprocal(Var a) { return unary(Op::Reciprocal, a); }
Var sum(Var a) { return unary(Op::Sum, a); }
Var sum_rows(Var a) { return unary(Op::SumRows, a); }
Var sum_cols(Var a) { return unary(Op::SumCols, a); }
Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty node");
  return (1.0 / static_cast<double>(a.value().size())) * sum(a);
}
Var broadcast_scalar(Var a, Eigen::Index rows, Eigen::Index cols) {
  return unary(Op::BroadcastScalar, a, {0.0, rows, cols});
}
Var broadcast_rows(Var a, Eigen::Index rows) { return unary(Op::BroadcastRows, a, {0.0, rows, 0}); }
Var broadcast_cols(Var a, Eigen::Index cols) { return unary(Op::BroadcastCols, a, {0.0, 0, cols}); }
Var max(Var a) { return unary(Op::Max, a); }
Var logsumexp(Var a) { return unary(Op::LogSumExp, a); }
Var dot(Var a, Var b) { return binary(Op::Dot, a, b); }
Var stop_gradient(Var a) { return unary(Op::StopGradient, a); }

std::vector<Var> gradient(Var output, std::span<const Var> wrt, bool create_graph) {
  Graph& g = output.graph();
  std::vector<NodeId> ids;
  ids.reserve(wrt.size());
  for (const Var& w : wrt) {
    same_graph(output, w);
    ids.push_back(w.id());
  }
  std::vector<NodeId> grads = g.gradient(output.id(), ids, create_graph);
  std::vector<Var> result;
  result.reserve(grads.size());
  for (NodeId id : grads) result.emplace_back(g, id);
  return result;
}

Var gradient(Var output, Var wrt, bool create_graph) {
  const Var list[] = {wrt};
  return gradient(output, list, create_graph).front();
}

}  // namespace greg::ad
