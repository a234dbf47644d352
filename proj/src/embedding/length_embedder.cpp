// SPDX-License-Identifier: Apache-2.0
#include "lenctl/embedding/length_embedder.hpp"

#include "lenctl/error.hpp"

namespace lenctl {

std::vector<int> default_hidden_dims(LengthScheme scheme) {
  switch (scheme) {
    case LengthScheme::bit: return {64, 256};
    case LengthScheme::ordinal: return {512, 512};
    case LengthScheme::level: return {};
  }
  return {};
}

LengthEmbedder::LengthEmbedder(LengthEmbedderConfig config, ad::Rng& rng)
    : config_(std::move(config)) {
  if (config_.dim <= 0) {
    throw ConfigError("length embedding dimension must be positive");
  }
  const int width = code_width(config_.scheme, config_.max_length);
  if (config_.scheme == LengthScheme::level) {
    config_.hidden.clear();
    table_ = ad::Tensor::parameter(
        ad::random_normal(config_.max_length, config_.dim, config_.table_init_std, rng));
    return;
  }
  if (config_.hidden.empty()) {
    config_.hidden = default_hidden_dims(config_.scheme);
  }
  if (config_.hidden.size() != 2) {
    throw ConfigError("length MLP needs exactly two hidden widths");
  }
  int in = width;
  for (int h : config_.hidden) {
    if (h <= 0) throw ConfigError("hidden width must be positive");
    layers_.emplace_back(in, h, config_.bias, rng);
    in = h;
  }
  layers_.emplace_back(in, config_.dim, config_.bias, rng);
}

void LengthEmbedder::check(const LengthCode& code) const {
  if (code.scheme != config_.scheme) {
    throw ContractError("length code scheme " + to_string(code.scheme) +
                        " does not match embedder scheme " + to_string(config_.scheme));
  }
  if (code.max_length != config_.max_length) {
    throw ContractError("length code max length does not match embedder");
  }
}

ad::Tensor LengthEmbedder::embed(const LengthCode& code) const {
  return embed_batch(std::span<const LengthCode>(&code, 1));
}

ad::Tensor LengthEmbedder::embed_batch(std::span<const LengthCode> codes) const {
  if (codes.empty()) {
    throw ContractError("embed_batch: no codes");
  }
  for (const auto& c : codes) check(c);
  if (config_.scheme == LengthScheme::level) {
    std::vector<int> rows;
    rows.reserve(codes.size());
    for (const auto& c : codes) rows.push_back(c.k - 1);
    return ad::gather_rows(table_, rows);
  }
  ad::Matrix input(static_cast<Eigen::Index>(codes.size()), codes.front().vector.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    input.row(static_cast<Eigen::Index>(i)) = codes[i].vector;
  }
  ad::Tensor x = ad::Tensor::constant(std::move(input));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](x);
    if (i + 1 < layers_.size()) x = ad::activation(x, config_.activation);
  }
  return x;
}

void LengthEmbedder::append_parameters(const std::string& prefix,
                                       ad::ParameterList& out) const {
  if (config_.scheme == LengthScheme::level) {
    out.push_back({prefix + ".table", table_});
    return;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].append_parameters(prefix + ".mlp" + std::to_string(i), out);
  }
}

}  // namespace lenctl
