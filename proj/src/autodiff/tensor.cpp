// SPDX-License-Identifier: Apache-2.0
#include "lenctl/autodiff/tensor.hpp"

#include "lenctl/error.hpp"

#include <algorithm>
#include <iostream>

namespace lenctl {

void warn(const std::string& message) {
  std::cerr << "warning: " << message << '\n';
}

}  // namespace lenctl

namespace lenctl::ad {

namespace {

thread_local Tape* current_tape = nullptr;

void require_finite(const Matrix& value) {
  if (!value.allFinite()) {
    throw NumericError("tensor contains a non-finite value");
  }
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  require_finite(value);
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = constant(std::move(value));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

std::vector<std::size_t> Tensor::shape() const {
  return {static_cast<std::size_t>(rows()), static_cast<std::size_t>(cols())};
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() requires a 1x1 tensor");
  }
  return node_->value(0, 0);
}

const Matrix& Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("tensor has no gradient");
  }
  return node_->grad;
}

void Tape::record(std::shared_ptr<detail::Node> output,
                  std::function<void()> backward_rule) {
  entries_.push_back({std::move(output), std::move(backward_rule)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  const auto produced = std::find_if(
      entries_.rbegin(), entries_.rend(),
      [&](const Entry& e) { return e.output == loss.node(); });
  if (produced == entries_.rend()) {
    throw ContractError("loss was not produced by an operation on this tape");
  }
  for (auto& entry : entries_) {
    entry.output->grad.resize(0, 0);
  }
  loss.node()->grad = Matrix::Ones(1, 1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.size() != 0) {
      it->backward_rule();
    }
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) {
  current_tape = &tape;
}

TapeScope::~TapeScope() { current_tape = previous_; }

Tape* active_tape() noexcept { return current_tape; }

void backward(const Tensor& loss) {
  if (current_tape == nullptr) {
    throw ContractError("backward called without an active tape");
  }
  current_tape->backward(loss);
}

}  // namespace lenctl::ad
