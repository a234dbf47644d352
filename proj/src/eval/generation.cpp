// SPDX-License-Identifier: Apache-2.0
#include "lenctl/eval/generation.hpp"

#include "lenctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lenctl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool emittable(int id) { return id == kEos || !is_special(id); }

/// Log-softmax over emittable tokens; masked entries are -inf.
ad::RowVector log_probs(const ad::RowVector& logits, double temperature) {
  ad::RowVector lp = logits / temperature;
  double max = kNegInf;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    if (emittable(static_cast<int>(i))) max = std::max(max, lp(i));
  }
  double z = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    if (emittable(static_cast<int>(i))) z += std::exp(lp(i) - max);
  }
  const double log_z = max + std::log(z);
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    lp(i) = emittable(static_cast<int>(i)) ? lp(i) - log_z : kNegInf;
  }
  return lp;
}

int argmax(const ad::RowVector& logits) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(logits.size()); ++i) {
    if (!emittable(i)) continue;
    if (best < 0 || logits(i) > logits(best)) best = i;
  }
  return best;
}

/// Emittable ids ordered by descending score, ties by ascending id.
std::vector<int> ranked(const ad::RowVector& scores) {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    if (emittable(i)) ids.push_back(i);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return ids;
}

int sample(const ad::RowVector& logits, const GenerationConfig& cfg, ad::Rng& rng) {
  const ad::RowVector lp = log_probs(logits, cfg.temperature);
  std::vector<int> ids = ranked(lp);
  std::size_t keep = ids.size();
  if (cfg.strategy == Strategy::top_k) {
    keep = std::min(keep, static_cast<std::size_t>(cfg.top_k));
  } else {
    double mass = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      mass += std::exp(lp(ids[i]));
      if (mass >= cfg.top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  ids.resize(keep);
  double total = 0.0;
  for (int id : ids) total += std::exp(lp(id));
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (int id : ids) {
    acc += std::exp(lp(id));
    if (u < acc) return id;
  }
  return ids.back();
}

std::vector<int> decode_single(const Model& model, const ConditionVector& condition,
                               const LengthCode& code, const GenerationConfig& cfg, int budget,
                               bool& hit_budget) {
  DecoderState state;
  ad::Rng rng(cfg.seed);
  std::vector<int> out;
  int prev = kBos;
  while (true) {
    if (static_cast<int>(out.size()) >= budget) {
      hit_budget = true;
      break;
    }
    const ad::RowVector logits = model.decoder.step(prev, state, condition, code);
    const int next = cfg.strategy == Strategy::greedy ? argmax(logits) : sample(logits, cfg, rng);
    if (next == kEos) break;
    out.push_back(next);
    prev = next;
  }
  return out;
}

struct Beam {
  std::vector<int> tokens;
  double score = 0.0;
  bool finished = false;
  DecoderState state;
};

std::vector<int> decode_beam(const Model& model, const ConditionVector& condition,
                             const LengthCode& code, const GenerationConfig& cfg, int budget,
                             bool& hit_budget) {
  const auto width = static_cast<std::size_t>(cfg.beam_width);
  std::vector<Beam> beams(1);
  for (int t = 0; t < budget; ++t) {
    std::vector<Beam> next;
    bool any_alive = false;
    for (Beam& beam : beams) {
      if (beam.finished) {
        next.push_back(beam);
        continue;
      }
      any_alive = true;
      const int prev = beam.tokens.empty() ? kBos : beam.tokens.back();
      const ad::RowVector lp =
          log_probs(model.decoder.step(prev, beam.state, condition, code), cfg.temperature);
      const std::vector<int> ids = ranked(lp);
      for (std::size_t j = 0; j < std::min(width, ids.size()); ++j) {
        Beam child;
        child.tokens = beam.tokens;
        child.score = beam.score + lp(ids[j]);
        if (ids[j] == kEos) {
          child.finished = true;
        } else {
          child.tokens.push_back(ids[j]);
          child.state = beam.state;
        }
        next.push_back(std::move(child));
      }
    }
    if (!any_alive) break;
    std::stable_sort(next.begin(), next.end(), [](const Beam& a, const Beam& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.tokens < b.tokens;
    });
    if (next.size() > width) next.resize(width);
    beams = std::move(next);
  }
  // Best finished hypothesis; unfinished ones were cut by the budget.
  const auto best = std::find_if(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; });
  if (best != beams.end()) return best->tokens;
  hit_budget = true;
  return beams.front().tokens;
}

}  // namespace

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::greedy;
  if (name == "beam") return Strategy::beam;
  if (name == "top_k" || name == "top-k") return Strategy::top_k;
  if (name == "top_p" || name == "top-p") return Strategy::top_p;
  throw ConfigError("unknown decoding strategy '" + std::string(name) + "'");
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::greedy: return "greedy";
    case Strategy::beam: return "beam";
    case Strategy::top_k: return "top_k";
    case Strategy::top_p: return "top_p";
  }
  return "greedy";
}

void validate(const GenerationConfig& c) {
  if (c.beam_width < 1 || c.top_k < 1) throw ConfigError("beam width and top-k must be >= 1");
  if (!(c.top_p > 0.0 && c.top_p <= 1.0)) throw ConfigError("top-p must be in (0, 1]");
  if (!(c.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (c.budget < 0) throw ConfigError("budget must be positive");
  if (c.mode == ControlMode::tokens ? !(c.target >= 1.0) : !(c.target > 0.0)) {
    throw RangeError("target must be >= 1 token or > 0 seconds");
  }
}

int resolved_budget(const GenerationConfig& c) {
  if (c.budget > 0) return c.budget;
  if (c.mode == ControlMode::duration) return kDurationTokenBudget;
  return static_cast<int>(std::lround(c.target)) + kTokenBudgetSlack;
}

LengthCode target_code(const Model& model, const GenerationConfig& cfg, bool* clamped) {
  const int K = model.max_length();
  int k = 0;
  bool was_clamped = false;
  if (cfg.mode == ControlMode::tokens) {
    const long rounded = std::lround(cfg.target);
    k = static_cast<int>(std::clamp<long>(rounded, 1, K));
    was_clamped = rounded != k;
  } else {
    k = discretize_duration(cfg.target);
    was_clamped = cfg.target > K * kDurationBinSeconds;
  }
  if (clamped != nullptr) *clamped = was_clamped;
  return encode_length(k, K, model.scheme());
}

Generation generate(const Model& model, const ConditionVector& condition,
                    const GenerationConfig& cfg) {
  validate(cfg);
  if (cfg.mode != model.control) {
    throw ContractError("model controls " + to_string(model.control) + ", request asks for " +
                        to_string(cfg.mode));
  }
  Generation g;
  const LengthCode code = target_code(model, cfg, &g.clamped);
  g.k = code.k;
  if (g.clamped) {
    g.warning = "target clamped to k=" + std::to_string(code.k);
    warn(g.warning);
  }
  int budget = resolved_budget(cfg);
  if (budget > model.decoder.config().max_seq_len) {
    budget = model.decoder.config().max_seq_len;
    const std::string note = "budget capped at max_seq_len " + std::to_string(budget);
    g.warning = g.warning.empty() ? note : g.warning + "; " + note;
  }
  g.tokens = cfg.strategy == Strategy::beam
                 ? decode_beam(model, condition, code, cfg, budget, g.hit_budget)
                 : decode_single(model, condition, code, cfg, budget, g.hit_budget);
  // The budget binds the round-trip count too.
  while (count_tokens(model.vocab, g.tokens) > budget) g.tokens.pop_back();
  g.text = model.vocab.decode(g.tokens);
  g.measured_length = count_tokens(model.vocab, g.tokens);
  g.measured_duration = duration_oracle(model.vocab, model.vocab.encode(g.text));
  return g;
}

}  // namespace lenctl
