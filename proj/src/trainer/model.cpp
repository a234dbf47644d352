// SPDX-License-Identifier: Apache-2.0
#include "lenctl/trainer/model.hpp"

namespace lenctl {

Model make_model(DecoderConfig config, Vocabulary vocab, ControlMode control,
                 std::uint64_t seed) {
  config.vocab_size = vocab.size();
  if (config.length.hidden.empty()) config.length.hidden = default_hidden_dims(config.length.scheme);
  ad::Rng rng(seed);
  return Model{Decoder(std::move(config), rng), std::move(vocab), control};
}

LengthCode sample_code(const Model& model, const Sample& sample) {
  const int k = model.control == ControlMode::tokens ? sample.length
                                                     : discretize_duration(sample.duration);
  return encode_length(k, model.max_length(), model.scheme());
}

}  // namespace lenctl
