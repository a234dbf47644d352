// SPDX-License-Identifier: Apache-2.0
#include "lenctl/autodiff/optimizer.hpp"

#include "lenctl/error.hpp"

#include <cmath>

namespace lenctl::ad {

void adamw_step(std::span<Tensor> params, OptimizerState& state) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) {
      throw ContractError("adamw_step: parameter without gradient");
    }
  }
  if (state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ContractError("adamw_step: parameter list changed between steps");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = params[i].mutable_value();
    const Matrix& g = params[i].grad();
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (m.rows() != value.rows() || m.cols() != value.cols()) {
      throw ContractError("adamw_step: moment shape does not match parameter");
    }
    value *= 1.0 - lr * state.weight_decay;
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    value.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + state.epsilon);
  }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double squared = 0.0;
  for (const Tensor& p : params) {
    if (p.has_grad()) squared += p.grad().squaredNorm();
  }
  const double norm = std::sqrt(squared);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& p : params) {
      if (p.has_grad()) p.node()->grad *= factor;
    }
  }
  return norm;
}

}  // namespace lenctl::ad
