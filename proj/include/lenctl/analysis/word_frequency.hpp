// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lenctl {

struct WordCount {
  std::string word;
  long count = 0;
  bool operator==(const WordCount&) const = default;
};

/// Splits on whitespace; each punctuation character is a word of its own.
std::vector<std::string> analysis_words(std::string_view text);

/// Counts sorted by descending count, ties by ascending word; at most
/// `top_n` entries (0 keeps all).
std::vector<WordCount> word_frequency(std::span<const std::string> captions, std::size_t top_n = 20);

}  // namespace lenctl
