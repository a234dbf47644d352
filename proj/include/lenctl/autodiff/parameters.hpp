// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"

#include <random>
#include <string>
#include <vector>

namespace lenctl::ad {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedTensor>;

/// Every model component draws its initial weights from this engine so a
/// seed fully determines a model.
using Rng = std::mt19937_64;

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

std::vector<Tensor> tensors_of(const ParameterList& params);

/// Dense affine layer x W + b.
class Linear {
 public:
  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, bool bias, Rng& rng,
         double stddev = -1.0);

  Tensor operator()(const Tensor& x) const;
  void append_parameters(const std::string& prefix, ParameterList& out) const;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

}  // namespace lenctl::ad
