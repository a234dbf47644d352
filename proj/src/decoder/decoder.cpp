// SPDX-License-Identifier: Apache-2.0
#include "lenctl/decoder/decoder.hpp"

#include "lenctl/error.hpp"

#include <cmath>

namespace lenctl {

void validate(const DecoderConfig& c) {
  if (c.layers <= 0 || c.heads <= 0 || c.dim <= 0 || c.ff_dim <= 0 ||
      c.max_seq_len <= 0 || c.vocab_size <= kNumSpecials || c.condition_dim <= 0) {
    throw ConfigError("decoder dimensions must be positive (and vocab > specials)");
  }
  if (c.dim % c.heads != 0) {
    throw ConfigError("decoder width " + std::to_string(c.dim) +
                      " not divisible by " + std::to_string(c.heads) + " heads");
  }
}

namespace {

ad::Tensor ones_row(int d) { return ad::Tensor::parameter(ad::Matrix::Ones(1, d)); }
ad::Tensor zeros_row(int d) { return ad::Tensor::parameter(ad::Matrix::Zero(1, d)); }

}  // namespace

Decoder::Decoder(DecoderConfig config, ad::Rng& rng) : config_(std::move(config)) {
  validate(config_);
  config_.length.dim = config_.dim;
  const int d = config_.dim;
  embedding_ = ComposedEmbedding(
      {config_.vocab_size, config_.max_seq_len, config_.positional, config_.length}, rng);
  condition_proj_ = ad::Linear(config_.condition_dim, d, true, rng);
  const double residual_std = 1.0 / std::sqrt(static_cast<double>(d) * 2.0 * config_.layers);
  for (int l = 0; l < config_.layers; ++l) {
    Layer layer;
    layer.ln1_gain = ones_row(d);
    layer.ln1_bias = zeros_row(d);
    layer.ln2_gain = ones_row(d);
    layer.ln2_bias = zeros_row(d);
    layer.ln3_gain = ones_row(d);
    layer.ln3_bias = zeros_row(d);
    for (Attention* a : {&layer.self, &layer.cross}) {
      a->q = ad::Linear(d, d, true, rng);
      a->k = ad::Linear(d, d, true, rng);
      a->v = ad::Linear(d, d, true, rng);
      a->o = ad::Linear(d, d, true, rng, residual_std);
    }
    layer.ff_in = ad::Linear(d, config_.ff_dim, true, rng);
    layer.ff_out = ad::Linear(config_.ff_dim, d, true, rng,
                              1.0 / std::sqrt(static_cast<double>(config_.ff_dim) * 2.0 * config_.layers));
    layers_.push_back(std::move(layer));
  }
  final_gain_ = ones_row(d);
  final_bias_ = zeros_row(d);
  output_ = ad::Linear(d, config_.vocab_size, true, rng);
}

void Decoder::check_condition(const ConditionVector& condition) const {
  if (condition.h.size() != config_.condition_dim) {
    throw DimensionError("condition has dimension " + std::to_string(condition.h.size()) +
                         ", decoder expects " + std::to_string(config_.condition_dim));
  }
  if (!condition.h.allFinite()) {
    throw NumericError("condition vector is not finite");
  }
}

ad::Tensor Decoder::memory(const ConditionVector& condition) const {
  check_condition(condition);
  return condition_proj_(ad::Tensor::constant(condition.h));
}

ad::Tensor Decoder::forward_teacher_forced(std::span<const int> tokens,
                                           const ConditionVector& condition,
                                           const LengthCode& code) const {
  const SequenceInput input{tokens, &condition, &code};
  return forward_packed(std::span<const SequenceInput>(&input, 1));
}

ad::Tensor Decoder::forward_packed(std::span<const SequenceInput> batch) const {
  if (batch.empty()) {
    throw ContractError("forward_packed: empty batch");
  }
  std::vector<int> ids, positions, length_row;
  std::vector<LengthCode> codes;
  std::vector<ad::AttentionBlock> self_blocks, cross_blocks;
  ad::Matrix memory_input(static_cast<Eigen::Index>(batch.size()), config_.condition_dim);
  Eigen::Index offset = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& seq = batch[s];
    if (seq.condition == nullptr || seq.code == nullptr) {
      throw ContractError("forward_packed: sequence without condition or length code");
    }
    const auto n = static_cast<Eigen::Index>(seq.tokens.size());
    if (n == 0) throw ContractError("forward_packed: empty sequence");
    if (n > config_.max_seq_len) {
      throw RangeError("sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                       std::to_string(config_.max_seq_len));
    }
    check_condition(*seq.condition);
    memory_input.row(static_cast<Eigen::Index>(s)) = seq.condition->h;
    codes.push_back(*seq.code);
    for (Eigen::Index i = 0; i < n; ++i) {
      ids.push_back(seq.tokens[static_cast<std::size_t>(i)]);
      positions.push_back(static_cast<int>(i));
      length_row.push_back(static_cast<int>(s));
    }
    self_blocks.push_back({offset, n, offset, n});
    cross_blocks.push_back({offset, n, static_cast<Eigen::Index>(s), 1});
    offset += n;
  }

  const ad::Tensor length_rows = embedding_.length_embedder().embed_batch(codes);
  if (observer_) {
    for (std::size_t r = 0; r < ids.size(); ++r) {
      observer_(codes[static_cast<std::size_t>(length_row[r])],
                length_rows.value().row(length_row[r]), positions[r]);
    }
  }
  ad::Tensor x = embedding_.compose_packed(ids, positions, length_rows, length_row);
  const ad::Tensor mem = condition_proj_(ad::Tensor::constant(std::move(memory_input)));
  const int heads = config_.heads;
  for (const Layer& layer : layers_) {
    ad::Tensor a = ad::layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    ad::Tensor att = ad::attention(layer.self.q(a), layer.self.k(a), layer.self.v(a), heads,
                                   self_blocks, true);
    x = ad::add(x, layer.self.o(att));
    ad::Tensor c = ad::layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    ad::Tensor cross = ad::attention(layer.cross.q(c), layer.cross.k(mem), layer.cross.v(mem),
                                     heads, cross_blocks, false);
    x = ad::add(x, layer.cross.o(cross));
    ad::Tensor f = ad::layer_norm(x, layer.ln3_gain, layer.ln3_bias);
    x = ad::add(x, layer.ff_out(ad::activation(layer.ff_in(f), config_.ff_activation)));
  }
  return output_(ad::layer_norm(x, final_gain_, final_bias_));
}

ad::RowVector Decoder::step(int prev_token, DecoderState& state,
                            const ConditionVector& condition, const LengthCode& code) const {
  if (state.position_ >= config_.max_seq_len) {
    throw RangeError("decoder state is full (" + std::to_string(config_.max_seq_len) +
                     " positions)");
  }
  if (!state.started_) {
    const ad::Tensor mem = memory(condition);
    state.length_row = embedding_.length_embedder().embed(code).value().row(0);
    state.length_k = code.k;
    state.self_keys.assign(layers_.size(), ad::Matrix(0, config_.dim));
    state.self_values.assign(layers_.size(), ad::Matrix(0, config_.dim));
    state.cross_keys.clear();
    state.cross_values.clear();
    for (const Layer& layer : layers_) {
      state.cross_keys.push_back(layer.cross.k(mem).value());
      state.cross_values.push_back(layer.cross.v(mem).value());
    }
    state.started_ = true;
  } else if (code.k != state.length_k) {
    throw ContractError("decoder state was started with a different length code");
  }
  if (observer_) observer_(code, state.length_row, state.position_);

  const int pos = state.position_;
  const ad::Tensor length_row = ad::Tensor::constant(state.length_row);
  const int zero = 0;
  ad::Tensor x = embedding_.compose_packed(std::span<const int>(&prev_token, 1),
                                           std::span<const int>(&pos, 1), length_row,
                                           std::span<const int>(&zero, 1));
  const int heads = config_.heads;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    ad::Tensor a = ad::layer_norm(x, layer.ln1_gain, layer.ln1_bias);
    ad::Matrix& keys = state.self_keys[l];
    ad::Matrix& values = state.self_values[l];
    keys.conservativeResize(pos + 1, Eigen::NoChange);
    values.conservativeResize(pos + 1, Eigen::NoChange);
    keys.row(pos) = layer.self.k(a).value().row(0);
    values.row(pos) = layer.self.v(a).value().row(0);
    const ad::AttentionBlock self_block{0, 1, 0, pos + 1};
    ad::Tensor att = ad::attention(layer.self.q(a), ad::Tensor::constant(keys),
                                   ad::Tensor::constant(values), heads,
                                   std::span<const ad::AttentionBlock>(&self_block, 1), true);
    x = ad::add(x, layer.self.o(att));
    ad::Tensor c = ad::layer_norm(x, layer.ln2_gain, layer.ln2_bias);
    const ad::AttentionBlock cross_block{0, 1, 0, 1};
    ad::Tensor cross = ad::attention(layer.cross.q(c), ad::Tensor::constant(state.cross_keys[l]),
                                     ad::Tensor::constant(state.cross_values[l]), heads,
                                     std::span<const ad::AttentionBlock>(&cross_block, 1), false);
    x = ad::add(x, layer.cross.o(cross));
    ad::Tensor f = ad::layer_norm(x, layer.ln3_gain, layer.ln3_bias);
    x = ad::add(x, layer.ff_out(ad::activation(layer.ff_in(f), config_.ff_activation)));
  }
  ++state.position_;
  return output_(ad::layer_norm(x, final_gain_, final_bias_)).value().row(0);
}

ad::ParameterList Decoder::parameters() const {
  ad::ParameterList out;
  embedding_.append_parameters("embed", out);
  condition_proj_.append_parameters("condition", out);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::string p = "layer" + std::to_string(l);
    out.push_back({p + ".ln1.gain", layer.ln1_gain});
    out.push_back({p + ".ln1.bias", layer.ln1_bias});
    layer.self.q.append_parameters(p + ".self.q", out);
    layer.self.k.append_parameters(p + ".self.k", out);
    layer.self.v.append_parameters(p + ".self.v", out);
    layer.self.o.append_parameters(p + ".self.o", out);
    out.push_back({p + ".ln2.gain", layer.ln2_gain});
    out.push_back({p + ".ln2.bias", layer.ln2_bias});
    layer.cross.q.append_parameters(p + ".cross.q", out);
    layer.cross.k.append_parameters(p + ".cross.k", out);
    layer.cross.v.append_parameters(p + ".cross.v", out);
    layer.cross.o.append_parameters(p + ".cross.o", out);
    out.push_back({p + ".ln3.gain", layer.ln3_gain});
    out.push_back({p + ".ln3.bias", layer.ln3_bias});
    layer.ff_in.append_parameters(p + ".ff.in", out);
    layer.ff_out.append_parameters(p + ".ff.out", out);
  }
  out.push_back({"final.gain", final_gain_});
  out.push_back({"final.bias", final_bias_});
  output_.append_parameters("output", out);
  return out;
}

TeacherForcingPair make_teacher_forcing_pair(std::span<const int> caption_tokens) {
  TeacherForcingPair pair;
  pair.inputs.reserve(caption_tokens.size() + 1);
  pair.inputs.push_back(kBos);
  pair.inputs.insert(pair.inputs.end(), caption_tokens.begin(), caption_tokens.end());
  pair.targets.assign(caption_tokens.begin(), caption_tokens.end());
  pair.targets.push_back(kEos);
  return pair;
}

}  // namespace lenctl
