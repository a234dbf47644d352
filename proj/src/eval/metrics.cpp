// SPDX-License-Identifier: Apache-2.0
#include "lenctl/eval/metrics.hpp"

#include "lenctl/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

namespace lenctl {

namespace {

constexpr int kMaxOrder = 4;

struct Clipped {
  long matched[kMaxOrder] = {0, 0, 0, 0};
  long total[kMaxOrder] = {0, 0, 0, 0};
  long candidate_length = 0;
  long reference_length = 0;
};

void add_clipped(Clipped& acc, const Words& candidate, std::span<const Words> references) {
  acc.candidate_length += static_cast<long>(candidate.size());
  // Closest reference length, shorter wins a tie.
  long best = -1;
  for (const Words& r : references) {
    const long len = static_cast<long>(r.size());
    const long diff = std::labs(len - static_cast<long>(candidate.size()));
    if (best < 0 || diff < std::labs(best - static_cast<long>(candidate.size())) ||
        (diff == std::labs(best - static_cast<long>(candidate.size())) && len < best)) {
      best = len;
    }
  }
  acc.reference_length += std::max(best, 0L);
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto counts = ngram_counts(candidate, n);
    std::map<Words, int> max_ref;
    for (const Words& r : references) {
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    for (const auto& [g, c] : counts) {
      const auto it = max_ref.find(g);
      acc.matched[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
      acc.total[n - 1] += c;
    }
  }
}

double bleu_from(const Clipped& acc) {
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (acc.total[n] == 0 || acc.matched[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(acc.matched[n]) / static_cast<double>(acc.total[n]));
  }
  const double c = static_cast<double>(acc.candidate_length);
  const double r = static_cast<double>(acc.reference_length);
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / kMaxOrder);
}

std::size_t lcs(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Words metric_words(std::string_view text) {
  Words words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (std::isalnum(c) || ch == '\'') {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::map<Words, int> ngram_counts(const Words& words, int n) {
  std::map<Words, int> counts;
  if (n < 1) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    ++counts[Words(words.begin() + static_cast<std::ptrdiff_t>(i),
                   words.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

double bleu4(const Words& candidate, std::span<const Words> references) {
  if (candidate.empty() || references.empty()) return 0.0;
  Clipped acc;
  add_clipped(acc, candidate, references);
  return bleu_from(acc);
}

double corpus_bleu4(std::span<const Words> candidates,
                    std::span<const std::vector<Words>> references) {
  if (candidates.size() != references.size()) {
    throw ContractError("corpus_bleu4: candidate and reference counts differ");
  }
  Clipped acc;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    add_clipped(acc, candidates[i], references[i]);
  }
  return acc.candidate_length == 0 ? 0.0 : bleu_from(acc);
}

double rouge_l(const Words& candidate, const Words& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double l = static_cast<double>(lcs(candidate, reference));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(candidate.size());
  const double r = l / static_cast<double>(reference.size());
  const double b2 = kRougeBeta * kRougeBeta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const Words& candidate, std::span<const Words> references) {
  double best = 0.0;
  for (const Words& r : references) best = std::max(best, rouge_l(candidate, r));
  return best;
}

CiderScorer::CiderScorer(std::span<const std::vector<Words>> reference_sets)
    : sets_(reference_sets.size()) {
  if (reference_sets.empty()) throw ContractError("CIDEr needs a nonempty reference corpus");
  for (const auto& refs : reference_sets) {
    std::set<Words> seen;
    for (const Words& r : refs) {
      for (int n = 1; n <= kMaxOrder; ++n) {
        for (const auto& entry : ngram_counts(r, n)) seen.insert(entry.first);
      }
    }
    for (const Words& g : seen) ++document_frequency_[g];
  }
}

double CiderScorer::idf(const Words& ngram) const {
  const auto it = document_frequency_.find(ngram);
  const double df = it == document_frequency_.end() ? 0.0 : it->second;
  return std::log((1.0 + static_cast<double>(sets_)) / (1.0 + df)) + 1.0;
}

double CiderScorer::score(const Words& candidate, std::span<const Words> references) const {
  if (references.empty()) return 0.0;
  double total = 0.0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto cand = ngram_counts(candidate, n);
    std::map<Words, double> cv;
    double cnorm = 0.0;
    for (const auto& [g, c] : cand) {
      cv[g] = c * idf(g);
      cnorm += cv[g] * cv[g];
    }
    double order_sum = 0.0;
    for (const Words& r : references) {
      double rnorm = 0.0, dot = 0.0;
      for (const auto& [g, c] : ngram_counts(r, n)) {
        const double w = c * idf(g);
        rnorm += w * w;
        const auto it = cv.find(g);
        if (it != cv.end()) dot += it->second * w;
      }
      if (cnorm > 0.0 && rnorm > 0.0) order_sum += dot / std::sqrt(cnorm * rnorm);
    }
    total += order_sum / static_cast<double>(references.size());
  }
  return 10.0 * total / kMaxOrder;
}

double corpus_cider(std::span<const Words> candidates,
                    std::span<const std::vector<Words>> reference_sets) {
  if (candidates.size() != reference_sets.size()) {
    throw ContractError("corpus_cider: candidate and reference counts differ");
  }
  const CiderScorer scorer(reference_sets);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    sum += scorer.score(candidates[i], reference_sets[i]);
  }
  return candidates.empty() ? 0.0 : sum / static_cast<double>(candidates.size());
}

}  // namespace lenctl
