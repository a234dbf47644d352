// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/trainer/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lenctl {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 4;
  int accumulation_steps = 8;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  /// Global gradient-norm clip; 0 disables it.
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  /// NaN when no held-out split was given.
  double heldout_loss = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

/// Teacher-forced next-token training. Each micro-batch of `batch_size`
/// samples is packed into one forward pass; its loss is the mean token
/// cross-entropy (EOS included) divided by `accumulation_steps`, and AdamW
/// steps once every `accumulation_steps` micro-batches (and once more for a
/// partial group at the end of an epoch).
///
/// Throws ContractError when `corpus_vocab` is not the model's vocabulary.
TrainLog train(Model& model, const Vocabulary& corpus_vocab, std::span<const Sample> train_set,
               std::span<const Sample> heldout, const TrainConfig& config);

/// Mean per-token cross-entropy without recording gradients.
double evaluate_loss(const Model& model, std::span<const Sample> samples, int batch_size = 16);

/// CSV with header step,epoch,loss,lr.
void write_metrics_csv(const std::filesystem::path& path, const TrainLog& log);
/// CSV with header epoch,train_loss,heldout_loss.
void write_epochs_csv(const std::filesystem::path& path, const TrainLog& log);

}  // namespace lenctl
