// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lenctl::ad {

/// AdamW hyper-parameters plus per-parameter moments. Moments are created on
/// the first step in the order the parameters are passed, so the same
/// parameter list must be used for every step.
struct OptimizerState {
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
};

/// Decoupled weight decay followed by the bias-corrected Adam update.
/// Gradients are read, never cleared.
void adamw_step(std::span<Tensor> params, OptimizerState& state);

/// Scales every gradient so that the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace lenctl::ad
