// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lenctl {

using Words = std::vector<std::string>;

/// Lowercased whitespace-separated words with punctuation removed.
Words metric_words(std::string_view text);

/// Sentence BLEU-4: geometric mean of clipped n-gram precisions (n = 1..4)
/// times the brevity penalty against the closest reference length. No
/// smoothing; any zero precision, or a candidate without n-grams of some
/// order, scores 0.
double bleu4(const Words& candidate, std::span<const Words> references);

/// Corpus BLEU-4: clipped counts and lengths pooled over all pairs before
/// taking precisions and the brevity penalty.
double corpus_bleu4(std::span<const Words> candidates,
                    std::span<const std::vector<Words>> references);

inline constexpr double kRougeBeta = 1.2;

/// LCS F-measure (1 + b^2) P R / (R + b^2 P) with b = 1.2.
double rouge_l(const Words& candidate, const Words& reference);

/// Maximum over references.
double rouge_l(const Words& candidate, std::span<const Words> references);

/// CIDEr: for n = 1..4, cosine between TF-IDF vectors of candidate and
/// reference n-grams, averaged over references and orders, times 10.
/// TF is the raw count; IDF is ln((1 + N) / (1 + df)) + 1 over the N
/// reference sets, so it stays positive when every set contains an n-gram.
class CiderScorer {
 public:
  /// One entry per evaluated item, each holding its references.
  explicit CiderScorer(std::span<const std::vector<Words>> reference_sets);

  double score(const Words& candidate, std::span<const Words> references) const;
  double idf(const Words& ngram) const;
  std::size_t corpus_size() const { return sets_; }

 private:
  std::map<Words, int> document_frequency_;
  std::size_t sets_ = 0;
};

/// Mean CIDEr over candidates[i] against reference_sets[i].
double corpus_cider(std::span<const Words> candidates, std::span<const std::vector<Words>> reference_sets);

/// n-gram counts of one order.
std::map<Words, int> ngram_counts(const Words& words, int n);

}  // namespace lenctl
