// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace lenctl {

struct IcaConfig {
  /// 0 selects the data dimension.
  int components = 0;
  int max_iterations = 500;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  /// Below this largest |excess kurtosis| the component order carries no
  /// information.
  double gaussian_threshold = 0.3;
  /// Eigenvalues below this fraction of the largest count as rank loss.
  double rank_tolerance = 1e-10;
};

struct Whitening {
  ad::RowVector mean;
  /// p x c: whitened = (x - mean) * transform.
  ad::Matrix transform;
  ad::Matrix whitened;
};

/// Centering and PCA whitening through the covariance eigendecomposition,
/// keeping at most `components` of the leading directions whose eigenvalues
/// pass the rank tolerance.
Whitening whiten(const ad::Matrix& x, int components, double rank_tolerance = 1e-10);

struct IcaResult {
  ad::RowVector mean;
  /// p x c: sources = (x - mean) * unmixing.
  ad::Matrix unmixing;
  ad::Matrix whitening;
  /// n x c projections, columns sorted by |excess kurtosis| descending.
  ad::Matrix sources;
  Eigen::VectorXd kurtosis;
  int requested_components = 0;
  int iterations = 0;
  bool converged = false;
  bool kurtosis_uninformative = false;
};

/// Sample excess kurtosis m4 / m2^2 - 3 (no bias correction).
double excess_kurtosis(const Eigen::VectorXd& values);

/// Symmetric fixed-point FastICA with the log-cosh (tanh) contrast.
IcaResult fastica(const ad::Matrix& x, const IcaConfig& config = {});

template <typename Derived>
IcaResult fastica(const Eigen::MatrixBase<Derived>& x, const IcaConfig& config = {}) {
  return fastica(ad::Matrix(x), config);
}

struct Responder {
  std::string word;
  int length = 0;
  double response = 0.0;
};

/// Rows of `ica.sources` ranked by |response| on component `dim`;
/// labels[i] names row i.
std::vector<Responder> top_responders(const IcaResult& ica,
                                      const std::vector<std::pair<std::string, int>>& labels,
                                      int dim, std::size_t top_n = 25);

}  // namespace lenctl
