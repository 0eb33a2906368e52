#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records one forward pass. Nodes are appended in evaluation order, so
// a node's parents always have smaller ids and walking ids downwards is a
// valid reverse topological order. Gradients live on the tape; parameters are
// bound by reference and never copied.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mdaforge/matrix.hpp"

namespace mdaforge::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1×1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Called during backward with the node's accumulated upstream gradient
  /// and its own forward value.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream, const Matrix& value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient (inputs, labels).
  Var constant(Matrix value);
  /// Owned leaf that receives a gradient.
  Var variable(Matrix value);
  /// Leaf aliasing caller-owned storage, which must outlive the tape.
  Var parameter(const Matrix& value);

  /// Appends an op node. It tracks gradients iff any parent does. Throws
  /// NonFiniteError if `value` holds a NaN or infinity.
  Var record(std::string_view op, Matrix value, std::span<const Var> parents, BackwardFn backward);

  /// Zeroes every gradient, seeds d(loss)/d(loss) = 1, and runs the backward
  /// rules in reverse order. Safe to call repeatedly.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::string_view op(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient accumulator of `v`, or nullptr when `v` is not differentiable.
  /// Backward rules use this to skip work for constant inputs.
  Matrix* grad_sink(Var v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string_view op;
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  Var push(Node node);
  const Node& node(Var v) const;

  // deque: references to existing nodes stay valid while the tape grows.
  std::deque<Node> nodes_;
};

// Forward primitives. All operands must live on the same tape.

Var matmul(Var a, Var b);
/// x (n×c) plus a 1×c bias on every row.
Var add_row_bias(Var x, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var tanh(Var x);
Var relu(Var x);
/// Row-wise log-softmax with max subtraction.
Var log_softmax_rows(Var x);
Var scale(Var x, double factor);
Var neg(Var x);
/// 1×1 sum of all entries.
Var sum(Var x);
/// 1×1 mean of all entries.
Var mean_all(Var x);
Var gather_rows(Var x, std::span<const std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
/// n×1 column holding x(i, columns[i]).
Var pick(Var x, std::span<const std::size_t> columns);
/// Gradient reversal: identity forward, upstream × (−lambda) backward.
Var grl(Var x, double lambda);
/// 1×1 mean of exp(−||a_i − b_j||² / (2σ²)) over all row pairs. σ is a
/// constant for differentiation.
Var gaussian_kernel_mean(Var a, Var b, double sigma);

}  // namespace mdaforge::ad
