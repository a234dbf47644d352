// SPDX-License-Identifier: Apache-2.0
#include "lenctl/embedding/composed_embedding.hpp"

#include "lenctl/error.hpp"

#include <cmath>

namespace lenctl {

PositionalKind parse_positional(std::string_view name) {
  if (name == "learned") return PositionalKind::learned;
  if (name == "sinusoidal") return PositionalKind::sinusoidal;
  throw ConfigError("unknown positional embedding '" + std::string(name) + "'");
}

std::string to_string(PositionalKind kind) {
  return kind == PositionalKind::learned ? "learned" : "sinusoidal";
}

namespace {

ad::Matrix sinusoidal_table(int rows, int dim) {
  ad::Matrix table(rows, dim);
  for (int pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      table(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return table;
}

}  // namespace

ComposedEmbedding::ComposedEmbedding(ComposedEmbeddingConfig config, ad::Rng& rng)
    : config_(std::move(config)) {
  if (config_.vocab_size <= 0 || config_.max_seq_len <= 0) {
    throw ConfigError("vocab size and max sequence length must be positive");
  }
  const int d = config_.length.dim;
  const double std = config_.length.table_init_std;
  word_ = ad::Tensor::parameter(ad::random_normal(config_.vocab_size, d, std, rng));
  if (config_.positional == PositionalKind::learned) {
    position_ = ad::Tensor::parameter(ad::random_normal(config_.max_seq_len, d, std, rng));
  } else {
    position_ = ad::Tensor::constant(sinusoidal_table(config_.max_seq_len, d));
  }
  length_ = LengthEmbedder(config_.length, rng);
}

void ComposedEmbedding::check_indices(std::span<const int> token_ids,
                                      std::span<const int> positions) const {
  for (int t : token_ids) {
    if (t < 0 || t >= config_.vocab_size) {
      throw IndexError("token id " + std::to_string(t) + " outside vocabulary");
    }
  }
  for (int p : positions) {
    if (p < 0 || p >= config_.max_seq_len) {
      throw IndexError("position " + std::to_string(p) + " outside [0, " +
                       std::to_string(config_.max_seq_len) + ")");
    }
  }
}

ad::Tensor ComposedEmbedding::compose(int token_id, int position,
                                      const LengthCode& code) const {
  const int zero = 0;
  return compose_packed(std::span<const int>(&token_id, 1),
                        std::span<const int>(&position, 1), length_.embed(code),
                        std::span<const int>(&zero, 1));
}

ad::Tensor ComposedEmbedding::compose_packed(std::span<const int> token_ids,
                                             std::span<const int> positions,
                                             const ad::Tensor& length_rows,
                                             std::span<const int> length_row) const {
  if (token_ids.size() != positions.size() || token_ids.size() != length_row.size()) {
    throw DimensionError("compose_packed: index spans differ in length");
  }
  check_indices(token_ids, positions);
  ad::Tensor x = ad::add(ad::gather_rows(word_, token_ids), ad::gather_rows(position_, positions));
  return ad::add(x, ad::gather_rows(length_rows, length_row));
}

void ComposedEmbedding::append_parameters(const std::string& prefix,
                                          ad::ParameterList& out) const {
  out.push_back({prefix + ".word", word_});
  if (config_.positional == PositionalKind::learned) {
    out.push_back({prefix + ".position", position_});
  }
  length_.append_parameters(prefix + ".length", out);
}

}  // namespace lenctl
