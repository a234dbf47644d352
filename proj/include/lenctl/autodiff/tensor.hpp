// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace lenctl::ad {

/// Row-major dense storage so that `data()` is the flat row-major array used
/// by checkpoints.
template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  /// `g` must not read this node's gradient.
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad.noalias() += g;
    }
  }
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node, so a
/// parameter tensor held by a model and captured by a recorded operation is
/// the same object.
///
/// Tensors are rank <= 2: a vector is a 1 x n row, a scalar is 1 x 1.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double value);

  bool defined() const noexcept { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  std::vector<std::size_t> shape() const;

  const Matrix& value() const { return node_->value; }
  /// Direct write access, for optimizers and checkpoint loading only.
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  bool requires_grad() const noexcept {
    return node_ != nullptr && node_->requires_grad;
  }
  bool has_grad() const noexcept {
    return node_ != nullptr && node_->grad.size() != 0;
  }
  const Matrix& grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations. Operations are appended in
/// execution order, which is a topological order of the graph; backward
/// walks the record in reverse and runs each rule once.
class Tape {
 public:
  void record(std::shared_ptr<detail::Node> output,
              std::function<void()> backward_rule);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Gradients of intermediate
  /// nodes are reset first; gradients of leaves accumulate across calls.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::shared_ptr<detail::Node> output;
    std::function<void()> backward_rule;
  };
  std::vector<Entry> entries_;
};

/// Makes `tape` the recording target for the current thread for the lifetime
/// of the scope. Without an active tape, operations compute values only.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

/// backward() on the thread's active tape.
void backward(const Tensor& loss);

}  // namespace lenctl::ad
