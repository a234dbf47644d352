// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/corpus/corpus.hpp"
#include "lenctl/decoder/decoder.hpp"

namespace lenctl {

/// A decoder together with the vocabulary it was built for and the quantity
/// its length code counts.
struct Model {
  Decoder decoder;
  Vocabulary vocab;
  ControlMode control = ControlMode::tokens;

  LengthScheme scheme() const { return decoder.config().length.scheme; }
  int max_length() const { return decoder.config().length.max_length; }
};

/// `config.vocab_size` is taken from the vocabulary.
Model make_model(DecoderConfig config, Vocabulary vocab, ControlMode control,
                 std::uint64_t seed);

/// Length code a training sample is conditioned on: k = L in tokens mode,
/// k = discretize_duration(duration) in duration mode.
LengthCode sample_code(const Model& model, const Sample& sample);

}  // namespace lenctl
