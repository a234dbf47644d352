// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/eval/generation.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lenctl {

struct Prediction {
  int sample_id = 0;
  double target = 0.0;
  std::string text;
  std::vector<int> tokens;
  int measured_length = 0;
  double measured_duration = 0.0;
  bool clamped = false;
};

/// Aggregate of one evaluation run. Lengths are tokens, or seconds in
/// duration mode; `target` is the mean requested value.
struct EvalReport {
  std::string label;
  ControlMode mode = ControlMode::tokens;
  double target = 0.0;
  std::size_t count = 0;
  double mean = 0.0;
  /// Population standard deviation of the measured values.
  double stddev = 0.0;
  /// mean - target.
  double signed_difference = 0.0;
  /// |mean - target|, the tables' "difference" column.
  double difference = 0.0;
  /// Mean over samples of |measured - target|.
  double mean_abs_error = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  std::size_t clamped = 0;
};

struct EvalResult {
  EvalReport report;
  std::vector<Prediction> predictions;
};

/// Each sample's own length (or duration) is the target. `base` supplies the
/// strategy and seed; its target is ignored. Throws ContractError on an empty
/// set or when base.mode disagrees with the model.
EvalResult gold_length_test(const Model& model, std::span<const Sample> samples,
                            const GenerationConfig& base);

/// One fixed-target run per entry of `targets`, every sample at each target.
std::vector<EvalResult> arbitrary_length_sweep(const Model& model, std::span<const Sample> samples,
                                               std::span<const double> targets,
                                               const GenerationConfig& base);

/// Metrics and statistics for predictions already made (references are the
/// samples' texts, matched by position).
EvalReport summarize(const std::string& label, ControlMode mode,
                     std::span<const Prediction> predictions, std::span<const Sample> samples);

/// JSONL: sample_id, target, text, tokens, measured_length, measured_duration.
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);

/// CSV header: target,CIDEr,BLEU-4,ROUGE-L,mean,std,difference,signed_difference,
/// mean_abs_error,count,mode.
void write_report_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);
std::string report_csv(std::span<const EvalReport> reports);

/// Line plot of signed difference against target with a +-1 std band.
std::string sweep_svg(std::span<const EvalReport> reports, const std::string& title);

}  // namespace lenctl
