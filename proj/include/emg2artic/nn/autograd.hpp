#pragma once

// Tape-free reverse-mode differentiation: every Var owns a node that points at
// its parents and knows how to push its gradient into them. backward() walks
// the graph in reverse topological order.

#include "emg2artic/types.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace emg2artic::nn {

struct Node {
  MatD value;
  MatD grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// grad += g, allocating on first use. No-op for constant nodes.
  void accumulate(const MatD& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad.array() += g.array();
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(MatD value, bool requires_grad = false);

  const MatD& value() const { return node_->value; }
  MatD& mutable_value() { return node_->value; }
  const MatD& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool defined() const { return static_cast<bool>(node_); }

  /// Scalar value of a 1x1 Var.
  double item() const;

  void zero_grad();

  /// Seed d(this)/d(this) = 1 (this must be 1x1) and propagate to every
  /// leaf that requires a gradient.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Builds a result node from parents; the backward closure is only kept
  /// when some parent needs a gradient.
  static Var make(MatD value, std::vector<Var> parents, std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

}  // namespace emg2artic::nn
