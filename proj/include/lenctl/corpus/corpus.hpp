// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/corpus/vocabulary.hpp"
#include "lenctl/decoder/decoder.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lenctl {

/// Attribute ids of a synthetic scene. Clauses after the first derive their
/// words from these, so everything in a caption is a function of the scene.
struct SceneAttributes {
  int subject = 0;
  int action = 0;
  int object = 0;
  int color = 0;
  int place = 0;
  int adjective = 0;
  int adjective2 = 0;
  int size = 0;

  int id() const;
  bool operator==(const SceneAttributes&) const = default;
};

/// Word lists the grammar draws from.
struct Lexicon {
  std::vector<std::string> subjects, actions, objects, colors, places, adjectives, sizes;
  static const Lexicon& standard();
};

struct Sample {
  int id = 0;
  ConditionVector condition;
  SceneAttributes scene;
  std::string text;
  std::vector<int> tokens;
  int length = 0;         // token count, specials excluded
  double duration = 0.0;  // duration_oracle(tokens)
};

struct CorpusSpec {
  int num_samples = 20000;
  /// Relative weight per target length. Empty selects a mixture of a
  /// Gaussian (length_mean, length_std) and a uniform floor over
  /// [min_length, max_length], both truncated to that range.
  std::map<int, double> length_histogram;
  double length_mean = 16.0;
  double length_std = 7.0;
  double uniform_fraction = 0.2;
  int min_length = 6;
  int max_length = 50;
  int condition_dim = 32;
  double condition_noise = 0.05;
  int vocab_size = 320;
  int max_clauses = 6;
  DurationModel duration;
  std::uint64_t seed = 0;
  /// Seed for the attribute-to-condition table. Corpora that share it
  /// describe the same "world" and can be evaluated with each other's models.
  std::uint64_t world_seed = 7;
};

void validate(const CorpusSpec& spec);

/// Per-length sampling weights a spec resolves to, normalized to sum to 1.
std::map<int, double> resolved_length_weights(const CorpusSpec& spec);

struct Corpus {
  Vocabulary vocab;
  std::vector<Sample> samples;
};

/// Deterministic given the spec. Steps: train the subword vocabulary on
/// unconstrained realizations of random scenes, then for each sample draw a
/// target length and a scene and realize exactly that many tokens.
Corpus generate_corpus(const CorpusSpec& spec);

/// Builds the vocabulary generate_corpus would build for `spec`.
Vocabulary build_vocabulary(const CorpusSpec& spec);

/// Exact-length caption of a scene, or nullopt when the grammar cannot hit
/// `length` tokens for it.
std::optional<std::string> realize_caption(const SceneAttributes& scene, int length,
                                           const Vocabulary& vocab, int max_clauses = 6);

/// Condition vector for a scene: concatenated per-attribute embeddings from
/// the world table plus Gaussian noise.
ConditionVector make_condition(const SceneAttributes& scene, int condition_dim,
                               std::uint64_t world_seed, double noise, ad::Rng& rng);

/// Rule-based recovery of (subject, action) from a caption's first clause.
std::optional<std::pair<int, int>> extract_subject_action(const std::string& text);

/// JSONL, one sample per line: id, text, tokens, length, duration,
/// condition, scene.
void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl_line(const Sample& sample);

/// Last `count` samples form the held-out split.
std::pair<std::vector<Sample>, std::vector<Sample>> split_holdout(std::vector<Sample> samples,
                                                                  std::size_t count);

}  // namespace lenctl
