#pragma once

// Reverse-mode differentiation over dense tensors.
//
// A Graph is an append-only tape. Every op appends one node holding its
// value and a rule that pushes the node's gradient into its parents, so node
// ids are already a topological order and backward is a single reverse sweep.
// Inputs are never modified; every op produces a fresh node.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/tensor.hpp"

namespace starnet {

class Graph;

enum class OpTag : std::uint8_t {
  constant,
  parameter,
  matmul,
  linear,
  add,
  sub,
  mul,
  neg,
  scale,
  sigmoid,
  tanh,
  colwise_max,
  concat_cols,
  slice_cols,
  tile_rows,
  reshape,
  sum,
  sum_squares,
  min_of,
};

std::string_view op_name(OpTag tag);

// Handle to a node. Cheap to copy; only valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is the point of the exercise. Identical to a constant
  // except for the tag; kept distinct so censuses and dumps can tell them apart.
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient accumulated by the last backward(); zeros if the node was not
  // reached.
  const Tensor& grad(Var v) const;
  OpTag op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  // Propagates d(loss)/d(node) to every node reachable from a scalar loss.
  void backward(Var loss);
  void zero_grad();

  // Rows processed by nodes carrying a role label, summed per role. Used to
  // audit how computation scales with the batch.
  std::map<std::string, std::size_t> census() const;
  std::size_t census(std::string_view role) const;

  using BackwardRule = std::function<void(Graph&, const Tensor& grad_out)>;

  // Appends a node. Parents must already exist in this graph.
  Var push(OpTag op, Tensor value, std::vector<std::uint32_t> parents, BackwardRule rule,
           std::string_view role = {}, std::size_t role_rows = 0);

  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_buffer(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    mutable Tensor grad;
    mutable bool has_grad = false;
    OpTag op = OpTag::constant;
    std::vector<std::uint32_t> parents;
    BackwardRule rule;
    std::string_view role;
    std::size_t role_rows = 0;
  };

  std::deque<Node> nodes_;  // deque: growing never moves existing values
};

// ---- differentiable ops ----------------------------------------------------

// A[m x k] * B[k x n].
Var matmul(Var a, Var b);
// Row-wise W x for each row x of X: X[N x in] * W[out x in]^T -> [N x out].
Var linear(Var x, Var w, std::string_view role = {});

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);

// Per-column maximum over rows: [N x D] -> [1 x D]. The gradient of each
// column goes to the row holding the maximum, lowest row on ties.
Var colwise_max(Var m);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// [D] or [1 x D] -> [n x D].
Var tile_rows(Var a, std::size_t n);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var sum_squares(Var a);
// Smallest of several scalars; gradient flows only into the selected one
// (lowest index on ties).
Var min_of(std::span<const Var> scalars);
std::size_t argmin_of(std::span<const Var> scalars);

}  // namespace starnet
