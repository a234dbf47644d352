// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/corpus/corpus.hpp"
#include "lenctl/eval/generation.hpp"
#include "lenctl/trainer/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lenctl {

struct AnalysisConfig {
  int first = 1;
  int last = 101;
  std::size_t top_words = 20;
  std::size_t probe_words = 50;
  std::vector<int> probe_lengths = {5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int ica_components = 0;
  std::size_t top_responders = 25;
};

/// A declarative run: sections [run], [corpus], [model], [train], [eval] and
/// [analysis] of `key = value` lines. The run seed seeds model
/// initialization, batch order and sampling, and the corpus unless
/// corpus.seed is given.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out;
  CorpusSpec corpus;
  std::size_t heldout = 200;
  DecoderConfig model;
  ControlMode control = ControlMode::tokens;
  TrainConfig train;
  GenerationConfig generation;
  std::size_t eval_samples = 200;
  std::vector<double> targets = {5, 20};
  double sweep_first = 5;
  double sweep_last = 100;
  double sweep_step = 5;
  AnalysisConfig analysis;
};

/// Throws ConfigError on syntax errors, unknown keys and bad values.
/// `seed_override` replaces [run] seed before implicit seeds are derived.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

/// parse_config on a file, then LENCTL_SEED and LENCTL_OUT override the run
/// seed and output directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

void write_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Sweep targets first, first + step, ..., up to last.
std::vector<double> sweep_targets(double first, double last, double step);

}  // namespace lenctl
