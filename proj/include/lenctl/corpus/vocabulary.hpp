// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lenctl {

/// Subword vocabulary: reserved specials at ids 0..3, the single characters
/// of the training alphabet, then one token per learned merge.
///
/// Text is split into chunks (an optional leading space followed by a run of
/// word characters, or by one punctuation character) and each chunk is
/// tokenized by greedy longest match. Chunks never share a token, so the
/// token count of a text is the sum over its chunks.
class Vocabulary {
 public:
  using Merge = std::pair<std::string, std::string>;

  Vocabulary() = default;

  /// Byte-pair-style training: repeatedly merge the most frequent adjacent
  /// symbol pair (ties broken by the lexicographically smallest pair) until
  /// `target_size` tokens exist or no pair occurs twice.
  static Vocabulary train(std::span<const std::string> texts, int target_size);

  /// Rebuilds a vocabulary from its ordered non-special tokens and merges.
  static Vocabulary from_parts(std::vector<std::string> tokens, std::vector<Merge> merges);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  std::optional<int> find(std::string_view piece) const;
  const std::vector<Merge>& merges() const { return merges_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Unknown characters become UNK (with a warning on stderr).
  std::vector<int> encode(std::string_view text) const;
  /// Specials decode to nothing.
  std::string decode(std::span<const int> ids) const;

  /// FNV-1a over tokens and merges, as 16 hex digits.
  std::string hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void index();

  std::vector<std::string> tokens_;
  std::vector<Merge> merges_;
  std::unordered_map<std::string, int> ids_;
  std::size_t longest_ = 1;
};

/// Splits text into tokenizer chunks; concatenating the chunks gives the text.
std::vector<std::string_view> pretokenize(std::string_view text);

inline std::vector<int> tokenize(const Vocabulary& vocab, std::string_view text) {
  return vocab.encode(text);
}
inline std::string detokenize(const Vocabulary& vocab, std::span<const int> ids) {
  return vocab.decode(ids);
}

/// Round-trip length: decode (dropping specials), re-tokenize, count.
int count_tokens(const Vocabulary& vocab, std::span<const int> ids);

/// Deterministic stand-in for a speech synthesizer: each token costs
/// per_token seconds plus per_char seconds per non-space character.
struct DurationModel {
  double per_token = 0.06;
  double per_char = 0.08;
};

/// Sum of per-token durations; specials contribute nothing.
double duration_oracle(const Vocabulary& vocab, std::span<const int> ids,
                       const DurationModel& model = {});

}  // namespace lenctl
