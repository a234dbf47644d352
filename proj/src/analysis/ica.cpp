// SPDX-License-Identifier: Apache-2.0
#include "lenctl/analysis/ica.hpp"

#include "lenctl/autodiff/parameters.hpp"
#include "lenctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lenctl {

namespace {

/// W <- (W W^T)^(-1/2) W.
ad::Matrix symmetric_decorrelation(const ad::Matrix& w) {
  Eigen::SelfAdjointEigenSolver<ad::Matrix> eig(w * w.transpose());
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

}  // namespace

Whitening whiten(const ad::Matrix& x, int components, double rank_tolerance) {
  const auto n = x.rows();
  if (n < 2) throw ContractError("whitening needs at least two rows");
  Whitening w;
  w.mean = x.colwise().mean();
  const ad::Matrix centered = x.rowwise() - w.mean;
  const ad::Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<ad::Matrix> eig(cov);
  // Eigen sorts ascending; take the largest first.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const ad::Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const double largest = std::max(values(0), 0.0);
  int rank = 0;
  while (rank < values.size() && values(rank) > rank_tolerance * largest && values(rank) > 0.0) {
    ++rank;
  }
  if (rank == 0) throw ContractError("whitening: data has no variance");
  int keep = components <= 0 ? static_cast<int>(x.cols()) : components;
  if (keep > rank) {
    warn("covariance has rank " + std::to_string(rank) + "; reducing " + std::to_string(keep) +
         " components to " + std::to_string(rank));
    keep = rank;
  }
  w.transform = vectors.leftCols(keep) *
                values.head(keep).cwiseSqrt().cwiseInverse().asDiagonal();
  w.whitened = centered * w.transform;
  return w;
}

double excess_kurtosis(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const Eigen::ArrayXd d = v.array() - mean;
  const double m2 = d.square().mean();
  const double m4 = d.square().square().mean();
  return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

IcaResult fastica(const ad::Matrix& x, const IcaConfig& config) {
  if (config.components > 0 && x.rows() <= config.components) {
    throw ContractError("fastica needs more rows than components");
  }
  IcaResult result;
  result.requested_components = config.components <= 0 ? static_cast<int>(x.cols()) : config.components;
  const Whitening wh = whiten(x, config.components, config.rank_tolerance);
  const ad::Matrix& z = wh.whitened;
  const auto n = static_cast<double>(z.rows());
  const auto c = z.cols();

  ad::Rng rng(config.seed);
  ad::Matrix w = symmetric_decorrelation(ad::random_normal(c, c, 1.0, rng));
  ad::Matrix best = w;
  double best_change = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= config.max_iterations; ++it) {
    const ad::Matrix proj = z * w.transpose();  // n x c
    const ad::Matrix g = proj.array().tanh().matrix();
    const Eigen::RowVectorXd g_prime = (1.0 - g.array().square()).matrix().colwise().mean();
    ad::Matrix next = g.transpose() * z / n - g_prime.transpose().asDiagonal() * w;
    next = symmetric_decorrelation(next);
    const double change =
        ((next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = next;
    result.iterations = it;
    if (change < best_change) {
      best_change = change;
      best = w;
    }
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) {
    warn("fastica did not converge in " + std::to_string(config.max_iterations) +
         " iterations; returning the best iterate");
    w = best;
  }

  const ad::Matrix sources = z * w.transpose();
  Eigen::VectorXd kurt(c);
  for (Eigen::Index j = 0; j < c; ++j) kurt(j) = excess_kurtosis(sources.col(j));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(c));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(kurt(a)) > std::abs(kurt(b));
  });

  const ad::Matrix unmixing = wh.transform * w.transpose();  // p x c
  result.mean = wh.mean;
  result.whitening = wh.transform;
  result.unmixing.resize(unmixing.rows(), c);
  result.sources.resize(sources.rows(), c);
  result.kurtosis.resize(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    const Eigen::Index from = order[static_cast<std::size_t>(j)];
    result.unmixing.col(j) = unmixing.col(from);
    result.sources.col(j) = sources.col(from);
    result.kurtosis(j) = kurt(from);
  }
  result.kurtosis_uninformative = result.kurtosis.cwiseAbs().maxCoeff() <= config.gaussian_threshold;
  return result;
}

std::vector<Responder> top_responders(const IcaResult& ica,
                                      const std::vector<std::pair<std::string, int>>& labels,
                                      int dim, std::size_t top_n) {
  if (dim < 0 || dim >= ica.sources.cols()) {
    throw RangeError("component " + std::to_string(dim) + " outside [0, " +
                     std::to_string(ica.sources.cols()) + ")");
  }
  if (labels.size() != static_cast<std::size_t>(ica.sources.rows())) {
    throw ContractError("top_responders: one label per analyzed row required");
  }
  std::vector<Responder> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows.push_back({labels[i].first, labels[i].second,
                    ica.sources(static_cast<Eigen::Index>(i), dim)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Responder& a, const Responder& b) {
    return std::abs(a.response) > std::abs(b.response);
  });
  if (rows.size() > top_n) rows.resize(top_n);
  return rows;
}

}  // namespace lenctl
