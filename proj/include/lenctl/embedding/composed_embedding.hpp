// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/embedding/length_embedder.hpp"

#include <span>
#include <string_view>

namespace lenctl {

enum class PositionalKind { learned, sinusoidal };
PositionalKind parse_positional(std::string_view name);
std::string to_string(PositionalKind kind);

struct ComposedEmbeddingConfig {
  int vocab_size = 0;
  int max_seq_len = 128;
  PositionalKind positional = PositionalKind::learned;
  LengthEmbedderConfig length;
};

/// Input embedding x_i = word(y_i) + length(k) + position(i). The same length
/// row is added at every position of a sequence.
class ComposedEmbedding {
 public:
  ComposedEmbedding() = default;
  ComposedEmbedding(ComposedEmbeddingConfig config, ad::Rng& rng);

  const ComposedEmbeddingConfig& config() const { return config_; }
  int dim() const { return config_.length.dim; }

  /// 1 x d embedding of one token.
  ad::Tensor compose(int token_id, int position, const LengthCode& code) const;

  /// Packed form: row r gets word(token_ids[r]) + position(positions[r]) +
  /// length_rows.row(length_row[r]).
  ad::Tensor compose_packed(std::span<const int> token_ids,
                            std::span<const int> positions,
                            const ad::Tensor& length_rows,
                            std::span<const int> length_row) const;

  const ad::Tensor& word_table() const { return word_; }
  const ad::Tensor& position_table() const { return position_; }
  ad::Tensor& word_table() { return word_; }
  ad::Tensor& position_table() { return position_; }
  const LengthEmbedder& length_embedder() const { return length_; }
  LengthEmbedder& length_embedder() { return length_; }

  void append_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  void check_indices(std::span<const int> token_ids, std::span<const int> positions) const;

  ComposedEmbeddingConfig config_;
  ad::Tensor word_;
  ad::Tensor position_;
  LengthEmbedder length_;
};

/// Free-function form of ComposedEmbedding::compose.
inline ad::Tensor compose_token_embedding(int token_id, int position,
                                          const LengthCode& code,
                                          const ComposedEmbedding& embedding) {
  return embedding.compose(token_id, position, code);
}

}  // namespace lenctl
