// SPDX-License-Identifier: Apache-2.0
#include "lenctl/corpus/corpus.hpp"

#include "lenctl/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lenctl {

namespace {

constexpr int kAttributeCount = 8;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

ad::Rng stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return ad::Rng(splitmix64(splitmix64(seed ^ splitmix64(stream)) + index));
}

int mod(int a, int n) { return ((a % n) + n) % n; }

/// Words of one clause after deriving its attributes from the scene.
struct ClauseWords {
  std::string subject, action, object, color, place, adjective, adjective2, size;
};

ClauseWords clause_words(const SceneAttributes& s, int clause) {
  const Lexicon& lex = Lexicon::standard();
  const int c = clause;
  const auto pick = [](const std::vector<std::string>& list, int index) {
    return list[static_cast<std::size_t>(mod(index, static_cast<int>(list.size())))];
  };
  SceneAttributes a = s;
  if (c > 0) {
    a.subject = s.subject + 5 * c + s.action;
    a.action = s.action + 7 * c + s.object;
    a.object = s.object + 3 * c + s.color;
    a.color = s.color + c + s.place;
    a.place = s.place + 2 * c + s.subject;
    a.adjective = s.adjective + c + s.size;
    a.adjective2 = s.adjective2 + c;
    a.size = s.size + 3 * c + s.color;
  }
  ClauseWords w;
  w.subject = pick(lex.subjects, a.subject);
  w.action = pick(lex.actions, a.action);
  w.object = pick(lex.objects, a.object);
  w.color = pick(lex.colors, a.color);
  w.place = pick(lex.places, a.place);
  const int n_adj = static_cast<int>(lex.adjectives.size());
  const int first_adj = mod(a.adjective, n_adj);
  w.adjective = lex.adjectives[static_cast<std::size_t>(first_adj)];
  w.adjective2 = lex.adjectives[static_cast<std::size_t>(
      mod(first_adj + 1 + mod(a.adjective2, n_adj - 1), n_adj))];
  w.size = pick(lex.sizes, a.size);
  return w;
}

enum class Slot { core, object, place, color, adjective, size, adjective2 };
constexpr Slot kSlotOrder[] = {Slot::core,  Slot::object, Slot::place, Slot::color,
                               Slot::adjective, Slot::size, Slot::adjective2};

/// An optional piece of the caption: which clause, which slot, token cost,
/// and the item it requires.
struct Item {
  int clause = 0;
  Slot slot = Slot::core;
  int cost = 0;
  int requires_item = -1;
};

struct Plan {
  int base_cost = 0;  // first clause core plus the final period
  std::vector<Item> items;
  std::vector<ClauseWords> clauses;
};

int word_cost(const Vocabulary& vocab, const std::string& word, bool initial) {
  return static_cast<int>(vocab.encode(initial ? word : " " + word).size());
}

/// Lays out the optional items of every clause; `cost` maps a word (with its
/// leading space) to a token count, or is null for a cost-free layout.
Plan make_plan(const SceneAttributes& scene, const Vocabulary* vocab, int max_clauses) {
  Plan plan;
  for (int c = 0; c < max_clauses; ++c) plan.clauses.push_back(clause_words(scene, c));
  const auto cost = [&](const std::string& w) { return vocab ? word_cost(*vocab, w, false) : 0; };
  if (vocab) {
    const ClauseWords& first = plan.clauses[0];
    plan.base_cost = word_cost(*vocab, "a", true) + cost(first.subject) + cost("is") +
                     cost(first.action) + static_cast<int>(vocab->encode(".").size());
  }
  int previous_core = -1;
  for (int c = 0; c < max_clauses; ++c) {
    const ClauseWords& w = plan.clauses[static_cast<std::size_t>(c)];
    int core = previous_core;
    int object = -1, place = -1, adjective = -1;
    for (Slot slot : kSlotOrder) {
      if (slot == Slot::core && c == 0) continue;
      Item item{c, slot, 0, -1};
      const int at = static_cast<int>(plan.items.size());
      switch (slot) {
        case Slot::core:
          item.cost = cost("and") + cost("a") + cost(w.subject) + cost("is") + cost(w.action);
          item.requires_item = previous_core;
          core = at;
          break;
        case Slot::object:
          item.cost = cost("with") + cost("a") + cost(w.object);
          item.requires_item = core;
          object = at;
          break;
        case Slot::place:
          item.cost = cost("in") + cost("the") + cost(w.place);
          item.requires_item = core;
          place = at;
          break;
        case Slot::color:
          item.cost = cost(w.color);
          item.requires_item = object;
          break;
        case Slot::adjective:
          item.cost = cost(w.adjective);
          item.requires_item = core;
          adjective = at;
          break;
        case Slot::size:
          item.cost = cost(w.size);
          item.requires_item = place;
          break;
        case Slot::adjective2:
          item.cost = cost(w.adjective2);
          item.requires_item = adjective;
          break;
      }
      plan.items.push_back(item);
    }
    previous_core = core;
  }
  return plan;
}

bool dependency_met(const Item& item, const std::vector<char>& chosen) {
  return item.requires_item < 0 || chosen[static_cast<std::size_t>(item.requires_item)] != 0;
}

/// Depth-first search that prefers including items in plan order; the first
/// feasible selection is returned, so captions grow by the earliest slots.
bool select_items(const Plan& plan, std::size_t index, int remaining,
                  std::vector<char>& chosen, const std::vector<int>& suffix_cost,
                  long& budget) {
  if (remaining == 0) return true;
  if (index >= plan.items.size() || remaining < 0 || remaining > suffix_cost[index] ||
      --budget < 0) {
    return false;
  }
  const Item& item = plan.items[index];
  if (dependency_met(item, chosen) && item.cost <= remaining) {
    chosen[index] = 1;
    if (select_items(plan, index + 1, remaining - item.cost, chosen, suffix_cost, budget)) {
      return true;
    }
    chosen[index] = 0;
  }
  return select_items(plan, index + 1, remaining, chosen, suffix_cost, budget);
}

std::string render(const Plan& plan, const std::vector<char>& chosen) {
  std::vector<std::array<bool, 7>> on(plan.clauses.size(), std::array<bool, 7>{});
  on[0][static_cast<int>(Slot::core)] = true;
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    if (chosen[i]) on[static_cast<std::size_t>(plan.items[i].clause)][static_cast<int>(plan.items[i].slot)] = true;
  }
  std::string text;
  for (std::size_t c = 0; c < plan.clauses.size(); ++c) {
    const auto& f = on[c];
    if (!f[static_cast<int>(Slot::core)]) break;
    const ClauseWords& w = plan.clauses[c];
    text += c == 0 ? "a" : " and a";
    if (f[static_cast<int>(Slot::adjective)]) {
      text += " " + w.adjective;
      if (f[static_cast<int>(Slot::adjective2)]) text += " " + w.adjective2;
    }
    text += " " + w.subject + " is " + w.action;
    if (f[static_cast<int>(Slot::object)]) {
      text += " with a";
      if (f[static_cast<int>(Slot::color)]) text += " " + w.color;
      text += " " + w.object;
    }
    if (f[static_cast<int>(Slot::place)]) {
      text += " in the";
      if (f[static_cast<int>(Slot::size)]) text += " " + w.size;
      text += " " + w.place;
    }
  }
  return text + ".";
}

SceneAttributes random_scene(ad::Rng& rng) {
  const Lexicon& lex = Lexicon::standard();
  const auto draw = [&](std::size_t n) {
    return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  SceneAttributes s;
  s.subject = draw(lex.subjects.size());
  s.action = draw(lex.actions.size());
  s.object = draw(lex.objects.size());
  s.color = draw(lex.colors.size());
  s.place = draw(lex.places.size());
  s.adjective = draw(lex.adjectives.size());
  s.adjective2 = draw(lex.adjectives.size() - 1);
  s.size = draw(lex.sizes.size());
  return s;
}

int index_of(const std::vector<std::string>& list, const std::string& word) {
  const auto it = std::find(list.begin(), list.end(), word);
  return it == list.end() ? -1 : static_cast<int>(it - list.begin());
}

}  // namespace

const Lexicon& Lexicon::standard() {
  static const Lexicon lexicon{
      {"baby", "man", "woman", "dog", "cat", "boy", "girl", "child", "player", "horse", "bird", "chef"},
      {"playing", "running", "sitting", "jumping", "dancing", "swimming", "eating", "walking",
       "singing", "reading", "riding", "cooking"},
      {"ball", "toy", "stick", "rope", "box", "hat", "book", "cup", "bike", "kite"},
      {"red", "blue", "green", "yellow", "black", "white", "pink", "brown"},
      {"park", "pool", "room", "yard", "street", "field", "kitchen", "garden"},
      {"little", "young", "happy", "tiny", "old", "tall"},
      {"big", "large", "quiet", "busy", "sunny", "wide"},
  };
  return lexicon;
}

int SceneAttributes::id() const {
  const Lexicon& lex = Lexicon::standard();
  long id = subject;
  id = id * static_cast<long>(lex.actions.size()) + action;
  id = id * static_cast<long>(lex.objects.size()) + object;
  id = id * static_cast<long>(lex.colors.size()) + color;
  id = id * static_cast<long>(lex.places.size()) + place;
  id = id * static_cast<long>(lex.adjectives.size()) + adjective;
  id = id * static_cast<long>(lex.adjectives.size() - 1) + adjective2;
  id = id * static_cast<long>(lex.sizes.size()) + size;
  return static_cast<int>(id);
}

void validate(const CorpusSpec& spec) {
  if (spec.num_samples <= 0) throw SpecError("corpus needs at least one sample");
  if (spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw SpecError("corpus length range is empty");
  }
  if (spec.condition_dim < kAttributeCount) {
    throw SpecError("condition dimension must be at least " + std::to_string(kAttributeCount));
  }
  if (spec.vocab_size <= kNumSpecials || spec.max_clauses < 1) {
    throw SpecError("vocabulary size and clause count must be positive");
  }
  for (const auto& [length, weight] : spec.length_histogram) {
    if (length < spec.min_length || length > spec.max_length || weight < 0.0) {
      throw SpecError("histogram entry " + std::to_string(length) +
                      " outside the corpus length range");
    }
  }
}

std::map<int, double> resolved_length_weights(const CorpusSpec& spec) {
  std::map<int, double> weights;
  if (!spec.length_histogram.empty()) {
    weights = spec.length_histogram;
  } else {
    const double span = spec.max_length - spec.min_length + 1;
    std::map<int, double> gaussian;
    double gaussian_total = 0.0;
    for (int l = spec.min_length; l <= spec.max_length; ++l) {
      const double z = (l - spec.length_mean) / spec.length_std;
      gaussian[l] = std::exp(-0.5 * z * z);
      gaussian_total += gaussian[l];
    }
    for (int l = spec.min_length; l <= spec.max_length; ++l) {
      weights[l] = (1.0 - spec.uniform_fraction) * gaussian[l] / gaussian_total +
                   spec.uniform_fraction / span;
    }
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0,
                                       [](double acc, const auto& kv) { return acc + kv.second; });
  if (!(total > 0.0)) throw SpecError("length histogram has no mass");
  for (auto& [l, w] : weights) w /= total;
  return weights;
}

Vocabulary build_vocabulary(const CorpusSpec& spec) {
  validate(spec);
  // Unconstrained realizations: every optional slot on with probability 1/2.
  ad::Rng rng = stream_rng(spec.seed, 1, 0);
  std::vector<std::string> texts;
  const int count = 3000;
  texts.reserve(count);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < count; ++i) {
    const Plan plan = make_plan(random_scene(rng), nullptr, spec.max_clauses);
    std::vector<char> chosen(plan.items.size(), 0);
    for (std::size_t k = 0; k < plan.items.size(); ++k) {
      chosen[k] = dependency_met(plan.items[k], chosen) && coin(rng) ? 1 : 0;
    }
    texts.push_back(render(plan, chosen));
  }
  return Vocabulary::train(texts, spec.vocab_size);
}

std::optional<std::string> realize_caption(const SceneAttributes& scene, int length,
                                           const Vocabulary& vocab, int max_clauses) {
  const Plan plan = make_plan(scene, &vocab, max_clauses);
  const int remaining = length - plan.base_cost;
  if (remaining < 0) return std::nullopt;
  std::vector<int> suffix(plan.items.size() + 1, 0);
  for (std::size_t i = plan.items.size(); i-- > 0;) {
    suffix[i] = suffix[i + 1] + plan.items[i].cost;
  }
  std::vector<char> chosen(plan.items.size(), 0);
  long budget = 200000;
  if (!select_items(plan, 0, remaining, chosen, suffix, budget)) return std::nullopt;
  std::string text = render(plan, chosen);
  if (static_cast<int>(vocab.encode(text).size()) != length) {
    throw SpecError("caption realization miscounted tokens for '" + text + "'");
  }
  return text;
}

ConditionVector make_condition(const SceneAttributes& scene, int condition_dim,
                               std::uint64_t world_seed, double noise, ad::Rng& rng) {
  const int width = condition_dim / kAttributeCount;
  const int values[kAttributeCount] = {scene.subject, scene.action, scene.object, scene.color,
                                       scene.place, scene.adjective, scene.adjective2, scene.size};
  ConditionVector cond;
  cond.h = ad::RowVector::Zero(condition_dim);
  cond.scene_id = scene.id();
  for (int a = 0; a < kAttributeCount; ++a) {
    // Table entry (a, value) is a fixed function of the world seed.
    ad::Rng table = stream_rng(world_seed, 100 + static_cast<std::uint64_t>(a),
                               static_cast<std::uint64_t>(values[a]));
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int j = 0; j < width; ++j) cond.h(a * width + j) = unit(table);
  }
  std::normal_distribution<double> jitter(0.0, noise);
  if (noise > 0.0) {
    for (int j = 0; j < condition_dim; ++j) cond.h(j) += jitter(rng);
  }
  return cond;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  validate(spec);
  Corpus corpus;
  corpus.vocab = build_vocabulary(spec);

  // The shortest caption any scene can produce bounds the reachable range.
  {
    ad::Rng probe = stream_rng(spec.seed, 3, 0);
    int shortest = std::numeric_limits<int>::max();
    for (int i = 0; i < 2000; ++i) {
      shortest = std::min(shortest, make_plan(random_scene(probe), &corpus.vocab, 1).base_cost);
    }
    if (spec.min_length < shortest) {
      throw SpecError("minimum length " + std::to_string(spec.min_length) +
                      " is shorter than the shortest caption (" + std::to_string(shortest) + ")");
    }
  }

  const auto weights = resolved_length_weights(spec);
  std::vector<int> lengths;
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& [l, w] : weights) {
    lengths.push_back(l);
    acc += w;
    cdf.push_back(acc);
  }
  corpus.samples.reserve(static_cast<std::size_t>(spec.num_samples));
  for (int i = 0; i < spec.num_samples; ++i) {
    ad::Rng rng = stream_rng(spec.seed, 2, static_cast<std::uint64_t>(i));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto at = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const int length = lengths[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        at, static_cast<std::ptrdiff_t>(lengths.size()) - 1))];
    std::optional<std::string> text;
    SceneAttributes scene;
    for (int attempt = 0; attempt < 200 && !text; ++attempt) {
      scene = random_scene(rng);
      text = realize_caption(scene, length, corpus.vocab, spec.max_clauses);
    }
    if (!text) {
      throw SpecError("no scene realizes a caption of " + std::to_string(length) + " tokens");
    }
    Sample sample;
    sample.id = i;
    sample.scene = scene;
    sample.text = *text;
    sample.tokens = corpus.vocab.encode(sample.text);
    sample.length = count_tokens(corpus.vocab, sample.tokens);
    sample.duration = duration_oracle(corpus.vocab, sample.tokens, spec.duration);
    sample.condition =
        make_condition(scene, spec.condition_dim, spec.world_seed, spec.condition_noise, rng);
    corpus.samples.push_back(std::move(sample));
  }
  return corpus;
}

std::optional<std::pair<int, int>> extract_subject_action(const std::string& text) {
  const Lexicon& lex = Lexicon::standard();
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) {
    while (!w.empty() && (w.back() == '.' || w.back() == ',')) w.pop_back();
    words.push_back(w);
  }
  const auto is = std::find(words.begin(), words.end(), "is");
  if (is == words.begin() || is == words.end() || is + 1 == words.end()) return std::nullopt;
  const int subject = index_of(lex.subjects, *(is - 1));
  const int action = index_of(lex.actions, *(is + 1));
  if (subject < 0 || action < 0) return std::nullopt;
  return std::make_pair(subject, action);
}

std::string to_jsonl_line(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["tokens"] = s.tokens;
  j["length"] = s.length;
  j["duration"] = s.duration;
  j["condition"] = std::vector<double>(s.condition.h.data(), s.condition.h.data() + s.condition.h.size());
  j["scene"] = {{"id", s.scene.id()},         {"subject", s.scene.subject},
                {"action", s.scene.action},   {"object", s.scene.object},
                {"color", s.scene.color},     {"place", s.scene.place},
                {"adjective", s.scene.adjective}, {"adjective2", s.scene.adjective2},
                {"size", s.scene.size}};
  return j.dump();
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& s : samples) out << to_jsonl_line(s) << '\n';
}

std::vector<Sample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read " + path.string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.id = j.at("id").get<int>();
      s.text = j.at("text").get<std::string>();
      s.tokens = j.at("tokens").get<std::vector<int>>();
      s.length = j.at("length").get<int>();
      s.duration = j.at("duration").get<double>();
      const auto h = j.at("condition").get<std::vector<double>>();
      s.condition.h = Eigen::Map<const ad::RowVector>(h.data(), static_cast<Eigen::Index>(h.size()));
      const auto& sc = j.at("scene");
      s.scene.subject = sc.at("subject").get<int>();
      s.scene.action = sc.at("action").get<int>();
      s.scene.object = sc.at("object").get<int>();
      s.scene.color = sc.at("color").get<int>();
      s.scene.place = sc.at("place").get<int>();
      s.scene.adjective = sc.at("adjective").get<int>();
      s.scene.adjective2 = sc.at("adjective2").get<int>();
      s.scene.size = sc.at("size").get<int>();
      s.condition.scene_id = s.scene.id();
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_holdout(std::vector<Sample> samples,
                                                                  std::size_t count) {
  count = std::min(count, samples.size());
  std::vector<Sample> held(std::make_move_iterator(samples.end() - static_cast<std::ptrdiff_t>(count)),
                           std::make_move_iterator(samples.end()));
  samples.resize(samples.size() - count);
  return {std::move(samples), std::move(held)};
}

}  // namespace lenctl
