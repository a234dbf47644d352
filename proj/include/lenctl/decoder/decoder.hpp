// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/embedding/composed_embedding.hpp"

#include <functional>
#include <span>
#include <vector>

namespace lenctl {

/// Reserved vocabulary ids; length counting ignores all four.
inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

inline bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

/// Feature vector the decoder cross-attends to, standing in for a video
/// encoder's pooled output.
struct ConditionVector {
  ad::RowVector h;
  int scene_id = -1;
};

struct DecoderConfig {
  int layers = 2;
  int heads = 4;
  int dim = 64;
  int ff_dim = 256;
  int max_seq_len = 128;
  int vocab_size = 0;
  int condition_dim = 16;
  PositionalKind positional = PositionalKind::learned;
  ad::Activation ff_activation = ad::Activation::gelu;
  /// `dim` is copied into length.dim at construction.
  LengthEmbedderConfig length;
};

void validate(const DecoderConfig& config);

/// Incremental decoding cache: per-layer self-attention keys/values of the
/// generated prefix plus the per-sequence cross-attention keys/values and
/// length row, so a step costs one token's worth of work.
class DecoderState {
 public:
  int position() const { return position_; }
  bool started() const { return started_; }
  void reset() { *this = DecoderState(); }

 private:
  friend class Decoder;
  bool started_ = false;
  int position_ = 0;
  int length_k = 0;
  ad::RowVector length_row;
  std::vector<ad::Matrix> self_keys;
  std::vector<ad::Matrix> self_values;
  std::vector<ad::Matrix> cross_keys;
  std::vector<ad::Matrix> cross_values;
};

/// One sequence of a packed teacher-forced batch.
struct SequenceInput {
  std::span<const int> tokens;
  const ConditionVector* condition = nullptr;
  const LengthCode* code = nullptr;
};

/// Pre-norm transformer decoder: causal self-attention, cross-attention over
/// the condition, feed-forward, each wrapped in a residual connection.
class Decoder {
 public:
  /// Called with the code, the length row actually added to the input, and
  /// the position it was added at. Instrumentation only.
  using LengthObserver =
      std::function<void(const LengthCode&, const ad::RowVector&, int position)>;

  Decoder() = default;
  Decoder(DecoderConfig config, ad::Rng& rng);

  const DecoderConfig& config() const { return config_; }
  const ComposedEmbedding& embedding() const { return embedding_; }
  ComposedEmbedding& embedding() { return embedding_; }

  /// Logits (n x v) for next-token prediction at every input position.
  ad::Tensor forward_teacher_forced(std::span<const int> tokens,
                                    const ConditionVector& condition,
                                    const LengthCode& code) const;

  /// Several sequences packed row-wise; attention never crosses sequences.
  ad::Tensor forward_packed(std::span<const SequenceInput> batch) const;

  /// Feeds `prev_token` at state.position() and returns next-token logits.
  /// The first call binds the state to `condition` and `code`.
  ad::RowVector step(int prev_token, DecoderState& state,
                     const ConditionVector& condition, const LengthCode& code) const;

  ad::ParameterList parameters() const;

  void set_length_observer(LengthObserver observer) { observer_ = std::move(observer); }

 private:
  struct Attention {
    ad::Linear q, k, v, o;
  };
  struct Layer {
    ad::Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias, ln3_gain, ln3_bias;
    Attention self, cross;
    ad::Linear ff_in, ff_out;
  };

  ad::Tensor memory(const ConditionVector& condition) const;
  void check_condition(const ConditionVector& condition) const;

  DecoderConfig config_;
  ComposedEmbedding embedding_;
  ad::Linear condition_proj_;
  std::vector<Layer> layers_;
  ad::Tensor final_gain_, final_bias_;
  ad::Linear output_;
  LengthObserver observer_;
};

/// Teacher-forcing input/target pair for a caption: inputs [BOS, t1..tL],
/// targets [t1..tL, EOS].
struct TeacherForcingPair {
  std::vector<int> inputs;
  std::vector<int> targets;
};
TeacherForcingPair make_teacher_forcing_pair(std::span<const int> caption_tokens);

}  // namespace lenctl
