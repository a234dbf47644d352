// SPDX-License-Identifier: Apache-2.0
#include "lenctl/analysis/probe.hpp"

#include "lenctl/analysis/similarity.hpp"

#include <algorithm>
#include <map>

namespace lenctl {

WordLengthProbe word_length_probe(const Model& model, const std::vector<int>& token_ids,
                                  const std::vector<int>& lengths) {
  const ad::Matrix& words = model.decoder.embedding().word_table().value();
  const LengthEmbedder& embedder = model.decoder.embedding().length_embedder();
  ad::Matrix length_rows(static_cast<Eigen::Index>(lengths.size()), words.cols());
  for (std::size_t j = 0; j < lengths.size(); ++j) {
    length_rows.row(static_cast<Eigen::Index>(j)) =
        embedding_matrix(embedder, lengths[j], lengths[j]).row(0);
  }
  WordLengthProbe probe;
  probe.rows.resize(static_cast<Eigen::Index>(token_ids.size() * lengths.size()), words.cols());
  Eigen::Index r = 0;
  for (int id : token_ids) {
    const std::string& word = model.vocab.token(id);
    for (std::size_t j = 0; j < lengths.size(); ++j, ++r) {
      probe.rows.row(r) = words.row(id) + length_rows.row(static_cast<Eigen::Index>(j));
      probe.labels.emplace_back(word, lengths[j]);
    }
  }
  return probe;
}

std::vector<int> frequent_tokens(std::span<const Sample> samples, std::size_t count) {
  std::map<int, long> counts;
  for (const auto& s : samples) {
    for (int id : s.tokens) {
      if (!is_special(id)) ++counts[id];
    }
  }
  std::vector<std::pair<int, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<int> out;
  for (std::size_t i = 0; i < std::min(count, ranked.size()); ++i) out.push_back(ranked[i].first);
  return out;
}

}  // namespace lenctl
