// SPDX-License-Identifier: Apache-2.0
#include "lenctl/autodiff/parameters.hpp"

#include "lenctl/autodiff/ops.hpp"

#include <cmath>

namespace lenctl::ad {

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = dist(rng);
  }
  return m;
}

std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Linear::Linear(Eigen::Index in, Eigen::Index out, bool bias, Rng& rng, double stddev) {
  if (stddev < 0.0) stddev = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = Tensor::parameter(random_normal(in, out, stddev, rng));
  if (bias) bias_ = Tensor::parameter(Matrix::Zero(1, out));
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight_);
  return bias_.defined() ? add_row(y, bias_) : y;
}

void Linear::append_parameters(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

}  // namespace lenctl::ad
