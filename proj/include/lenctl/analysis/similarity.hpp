// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/tensor.hpp"
#include "lenctl/embedding/length_embedder.hpp"
#include "lenctl/error.hpp"

#include <Eigen/Dense>

#include <algorithm>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lenctl {

/// Pairwise cosine similarity of the rows of `x`. Pairs involving a zero
/// row are 0 (with a warning).
template <typename Derived>
ad::Matrix cosine_similarity(const Eigen::MatrixBase<Derived>& x) {
  using Eigen::Index;
  const Index n = x.rows();
  Eigen::VectorXd norms = x.rowwise().norm();
  ad::Matrix gram = x * x.transpose();
  ad::Matrix out(n, n);
  bool zero = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double d = norms(i) * norms(j);
      if (d == 0.0) {
        zero = true;
        out(i, j) = 0.0;
      } else {
        out(i, j) = std::clamp(gram(i, j) / d, -1.0, 1.0);
      }
    }
  }
  if (zero) warn("cosine similarity of a zero vector taken as 0");
  return out;
}

struct SimilarityMatrix {
  std::vector<int> lengths;
  ad::Matrix values;
};

/// Raw codes t_k (one row per k) of a scheme over [first, last].
ad::Matrix code_matrix(LengthScheme scheme, int max_length, int first, int last);

/// Learned embeddings e_k over [first, last].
ad::Matrix embedding_matrix(const LengthEmbedder& embedder, int first, int last);

/// (code similarity, embedding similarity) over lengths first..last.
/// Throws RangeError when the range leaves [1, K].
std::pair<SimilarityMatrix, SimilarityMatrix> similarity_matrices(const LengthEmbedder& embedder,
                                                                  int first, int last);

/// CSV with a header row and column of lengths.
void write_similarity_csv(const std::filesystem::path& path, const SimilarityMatrix& m);

/// Heatmap over [-1, 1] with ticks every `tick` lengths.
std::string similarity_svg(const SimilarityMatrix& m, const std::string& title, int tick = 10);

/// Header scheme,k,e0..e{d-1}; one row per length.
void write_embedding_csv(const std::filesystem::path& path, LengthScheme scheme,
                         const std::vector<int>& lengths, const ad::Matrix& embeddings);

struct EmbeddingTable {
  LengthScheme scheme = LengthScheme::ordinal;
  std::vector<int> lengths;
  ad::Matrix values;
};

/// Reads write_embedding_csv output.
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);

}  // namespace lenctl
