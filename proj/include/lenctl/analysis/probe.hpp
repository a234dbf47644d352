// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/trainer/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lenctl {

struct WordLengthProbe {
  /// One row per (word, length): word embedding plus length embedding.
  ad::Matrix rows;
  std::vector<std::pair<std::string, int>> labels;
};

/// Rows word(t) + e_k for every token t of `token_ids` and k of `lengths`,
/// word-major.
WordLengthProbe word_length_probe(const Model& model, const std::vector<int>& token_ids,
                                  const std::vector<int>& lengths);

/// Ids of the `count` most frequent non-special tokens in `samples`, ties by
/// ascending id.
std::vector<int> frequent_tokens(std::span<const Sample> samples, std::size_t count);

}  // namespace lenctl
