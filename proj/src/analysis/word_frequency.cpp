// SPDX-License-Identifier: Apache-2.0
#include "lenctl/analysis/word_frequency.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace lenctl {

std::vector<std::string> analysis_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || ch == '\'') {
      current.push_back(ch);
    } else {
      flush();
      words.emplace_back(1, ch);
    }
  }
  flush();
  return words;
}

std::vector<WordCount> word_frequency(std::span<const std::string> captions, std::size_t top_n) {
  std::map<std::string, long> counts;
  for (const auto& caption : captions) {
    for (auto& w : analysis_words(caption)) ++counts[w];
  }
  std::vector<WordCount> out;
  for (const auto& [w, c] : counts) out.push_back({w, c});
  std::stable_sort(out.begin(), out.end(),
                   [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  if (top_n > 0 && out.size() > top_n) out.resize(top_n);
  return out;
}

}  // namespace lenctl
