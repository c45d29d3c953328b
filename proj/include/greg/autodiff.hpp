#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "greg/tensor.hpp"

/// Reverse-mode differentiation on an append-only graph.
///
/// Every node stores its value eagerly. `Graph::gradient` walks the graph in
/// reverse creation order and records the adjoint computation as new nodes on
/// the same graph, so a gradient can itself be differentiated (double
/// backprop). Values are 2-D row-major matrices: scalars are 1x1, per-sample
/// quantities are n x 1, batches are n x d.
namespace greg::ad {

enum class Op : std::uint8_t {
  Constant,
  Variable,
  Add,
  Sub,
  Mul,
  Neg,
  Scale,
  Shift,
  MatMul,
  Transpose,
  Relu,
  LeakyRelu,
  Exp,
  Log,
  Sqrt,
  Reciprocal,
  Sum,
  SumRows,
  SumCols,
  BroadcastScalar,
  BroadcastRows,
  BroadcastCols,
  Max,
  LogSumExp,
  Dot,
  StopGradient,
};

std::string_view op_name(Op op);

struct NodeId {
  std::uint32_t index = 0;
  std::uint32_t generation = 0;

  friend bool operator==(NodeId, NodeId) = default;
};

/// Per-op attribute: scale factor, shift amount or leaky slope in `value`;
/// target extents for the broadcast ops.
struct OpAttr {
  double value = 0.0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

struct Node {
  Op op = Op::Constant;
  std::vector<NodeId> parents;
  OpAttr attr;
  Matrix value;
  bool requires_grad = false;
};

class Graph {
 public:
  NodeId constant(Matrix value);
  NodeId variable(Matrix value);
  NodeId constant(const Tensor& t) { return constant(t.matrix()); }
  NodeId variable(const Tensor& t) { return variable(t.matrix()); }

  /// Appends a node and evaluates it. Throws ShapeError on incompatible
  /// parents, NumericError if the result is not finite.
  NodeId record(Op op, std::span<const NodeId> parents, OpAttr attr = {});
  NodeId record(Op op, std::initializer_list<NodeId> parents, OpAttr attr = {}) {
    return record(op, std::span<const NodeId>(parents.begin(), parents.size()), attr);
  }

  const Node& node(NodeId id) const;
  const Matrix& value(NodeId id) const { return node(id).value; }
  double scalar(NodeId id) const;
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  std::uint32_t generation() const { return generation_; }

  /// Drops every node created at or after `size`. Ids of dropped nodes become
  /// invalid.
  void truncate(std::size_t size);
  /// Drops all nodes and invalidates every id handed out so far.
  void clear();

  /// d(output)/d(wrt[i]) for each i. With `create_graph` the results are graph
  /// nodes that can be differentiated again; otherwise the backward nodes are
  /// discarded and the results are constants. A `wrt` node that does not
  /// influence `output` gets a zero gradient.
  std::vector<NodeId> gradient(NodeId output, std::span<const NodeId> wrt, bool create_graph);

  /// Detached gradient values; leaves the graph unchanged.
  std::vector<Matrix> gradient_values(NodeId output, std::span<const NodeId> wrt);

 private:
  void check(NodeId id) const;
  Matrix evaluate(Op op, std::span<const NodeId> parents, const OpAttr& attr) const;
  void backward_rule(NodeId id, NodeId adjoint, const std::vector<bool>& needed,
                     std::vector<NodeId>& adjoints, std::vector<bool>& has_adjoint);

  std::vector<Node> nodes_;
  std::uint32_t generation_ = 0;
};

/// Handle pairing a node with its graph, so expressions read like math.
class Var {
 public:
  Var() = default;
  Var(Graph& graph, NodeId id) : graph_(&graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  const Matrix& value() const { return graph_->value(id_); }
  double scalar() const { return graph_->scalar(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Graph* graph_ = nullptr;
  NodeId id_;
};

Var constant(Graph& g, Matrix value);
Var variable(Graph& g, Matrix value);
Var constant(Graph& g, double value);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator*(double c, Var a);
Var operator+(Var a, double c);
Var operator-(Var a, double c);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var reciprocal(Var a);
/// Sum of all entries, 1x1.
Var sum(Var a);
/// Column sums, 1 x cols.
Var sum_rows(Var a);
/// Row sums, rows x 1.
Var sum_cols(Var a);
Var mean(Var a);
Var broadcast_scalar(Var a, Eigen::Index rows, Eigen::Index cols);
Var broadcast_rows(Var a, Eigen::Index rows);
Var broadcast_cols(Var a, Eigen::Index cols);
/// Row-wise maximum, rows x 1.
Var max(Var a);
/// Row-wise log-sum-exp in shifted form, rows x 1.
Var logsumexp(Var a);
/// Frobenius inner product, 1x1.
Var dot(Var a, Var b);
Var stop_gradient(Var a);

std::vector<Var> gradient(Var output, std::span<const Var> wrt, bool create_graph);
Var gradient(Var output, Var wrt, bool create_graph);

}  // namespace greg::ad
