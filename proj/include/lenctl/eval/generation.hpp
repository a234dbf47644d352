// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lenctl/trainer/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lenctl {

enum class Strategy { greedy, beam, top_k, top_p };
Strategy parse_strategy(std::string_view name);
std::string to_string(Strategy strategy);

inline constexpr int kTokenBudgetSlack = 10;
inline constexpr int kDurationTokenBudget = 50;

struct GenerationConfig {
  /// Tokens, or seconds in duration mode.
  double target = 20.0;
  ControlMode mode = ControlMode::tokens;
  Strategy strategy = Strategy::greedy;
  int beam_width = 5;
  int top_k = 10;
  double top_p = 0.9;
  double temperature = 1.0;
  /// Maximum tokens; 0 selects target + 10 (tokens) or 50 (duration).
  int budget = 0;
  std::uint64_t seed = 0;
};

void validate(const GenerationConfig& config);

/// Budget after applying the defaults.
int resolved_budget(const GenerationConfig& config);

struct Generation {
  std::vector<int> tokens;  // without BOS/EOS
  std::string text;
  int k = 0;
  bool clamped = false;
  bool hit_budget = false;
  int measured_length = 0;
  double measured_duration = 0.0;
  std::string warning;
};

/// Length code a request resolves to, with the clamp flag. Tokens mode
/// rounds the target and clamps it to [1, K]; duration mode quantizes.
LengthCode target_code(const Model& model, const GenerationConfig& config, bool* clamped = nullptr);

/// Autoregressive decoding with the length code injected at every step.
/// BOS, PAD and UNK are never emitted; decoding ends at EOS or the budget,
/// which is capped at the decoder's max_seq_len.
/// Greedy ties go to the lowest token id; beam scores are summed
/// log-probabilities without length normalization.
Generation generate(const Model& model, const ConditionVector& condition,
                    const GenerationConfig& config);

}  // namespace lenctl
