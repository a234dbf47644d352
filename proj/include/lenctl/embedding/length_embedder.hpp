// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/autodiff/ops.hpp"
#include "lenctl/autodiff/parameters.hpp"
#include "lenctl/embedding/length_code.hpp"

#include <span>
#include <string>
#include <vector>

namespace lenctl {

struct LengthEmbedderConfig {
  LengthScheme scheme = LengthScheme::ordinal;
  int max_length = kDefaultMaxLength;
  int dim = 64;
  /// Hidden widths of the 3-layer MLP; empty selects the scheme default,
  /// (64, 256) for bit and (512, 512) for ordinal. Ignored for level.
  std::vector<int> hidden;
  ad::Activation activation = ad::Activation::gelu;
  bool bias = true;
  /// Standard deviation of the level table (and of the other tables of the
  /// composed embedding).
  double table_init_std = 0.1;
};

std::vector<int> default_hidden_dims(LengthScheme scheme);

/// Maps a LengthCode to a d-dimensional embedding: a row of the K x d table
/// for level codes, a 3-layer MLP (activation between layers, none on the
/// output) for bit and ordinal codes.
class LengthEmbedder {
 public:
  LengthEmbedder() = default;
  LengthEmbedder(LengthEmbedderConfig config, ad::Rng& rng);

  const LengthEmbedderConfig& config() const { return config_; }
  LengthScheme scheme() const { return config_.scheme; }
  int dim() const { return config_.dim; }

  /// 1 x d embedding of a single code.
  ad::Tensor embed(const LengthCode& code) const;
  /// B x d, one row per code.
  ad::Tensor embed_batch(std::span<const LengthCode> codes) const;

  void append_parameters(const std::string& prefix, ad::ParameterList& out) const;

  /// Level table (K x d); undefined for MLP schemes.
  const ad::Tensor& table() const { return table_; }
  /// MLP layers; empty for the level scheme.
  const std::vector<ad::Linear>& layers() const { return layers_; }
  std::vector<ad::Linear>& layers() { return layers_; }

 private:
  void check(const LengthCode& code) const;

  LengthEmbedderConfig config_;
  ad::Tensor table_;
  std::vector<ad::Linear> layers_;
};

/// Convenience wrapper for embed_length(code, embedder).
inline ad::Tensor embed_length(const LengthCode& code, const LengthEmbedder& embedder) {
  return embedder.embed(code);
}

}  // namespace lenctl
