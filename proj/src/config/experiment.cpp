// SPDX-License-Identifier: Apache-2.0
#include "lenctl/config/experiment.hpp"

#include "lenctl/error.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace lenctl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

std::vector<std::string> split_list(const std::string& v) {
  std::string body = v;
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::vector<std::string> out;
  std::istringstream in(body);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      out = std::stoull(v, &used);
    } else if constexpr (std::is_same_v<T, std::size_t>) {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<std::size_t>(std::stoull(v, &used));
    } else {
      out = static_cast<T>(std::stol(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': '" + v + "' is not a valid number");
  }
}

struct Field {
  std::function<void(const std::string&, const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
Field num(T& ref) {
  return {[&ref](const std::string& k, const std::string& v) { ref = parse_number<T>(k, v); },
          [&ref] {
            if constexpr (std::is_same_v<T, double>) return number(ref);
            else return std::to_string(ref);
          }};
}

template <typename T>
Field list(std::vector<T>& ref) {
  return {[&ref](const std::string& k, const std::string& v) {
            ref.clear();
            for (const auto& item : split_list(v)) ref.push_back(parse_number<T>(k, item));
          },
          [&ref] {
            std::string out;
            for (std::size_t i = 0; i < ref.size(); ++i) {
              if (i > 0) out += ", ";
              if constexpr (std::is_same_v<T, double>) out += number(ref[i]);
              else out += std::to_string(ref[i]);
            }
            return out;
          }};
}

template <typename E, typename Parse, typename Print>
Field enumeration(E& ref, Parse parse, Print print) {
  return {[&ref, parse](const std::string&, const std::string& v) { ref = parse(v); },
          [&ref, print] { return print(ref); }};
}

Field text(std::string& ref) {
  return {[&ref](const std::string&, const std::string& v) { ref = v; },
          [&ref] { return "\"" + ref + "\""; }};
}

Field boolean(bool& ref) {
  return {[&ref](const std::string& k, const std::string& v) {
            if (v == "true" || v == "1") ref = true;
            else if (v == "false" || v == "0") ref = false;
            else throw ConfigError("'" + k + "': expected true or false");
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field histogram(std::map<int, double>& ref) {
  return {[&ref](const std::string& k, const std::string& v) {
            ref.clear();
            for (const auto& item : split_list(v)) {
              const auto colon = item.find(':');
              if (colon == std::string::npos) throw ConfigError("'" + k + "': expected length:weight pairs");
              ref[parse_number<int>(k, trim(item.substr(0, colon)))] =
                  parse_number<double>(k, trim(item.substr(colon + 1)));
            }
          },
          [&ref] {
            std::string out;
            for (const auto& [l, w] : ref) {
              if (!out.empty()) out += ", ";
              out += std::to_string(l) + ":" + number(w);
            }
            return out;
          }};
}

using Section = std::vector<std::pair<std::string, Field>>;
using Schema = std::vector<std::pair<std::string, Section>>;

Schema schema(ExperimentConfig& c) {
  const auto scheme = [](const std::string& v) { return parse_scheme(v); };
  const auto scheme_name = [](LengthScheme s) { return to_string(s); };
  const auto activation = [](const std::string& v) { return ad::parse_activation(v); };
  const auto activation_name = [](ad::Activation a) { return ad::to_string(a); };
  return {
      {"run", {{"seed", num(c.seed)}, {"out", text(c.out)}}},
      {"corpus",
       {{"num_samples", num(c.corpus.num_samples)},
        {"heldout", num(c.heldout)},
        {"histogram", histogram(c.corpus.length_histogram)},
        {"length_mean", num(c.corpus.length_mean)},
        {"length_std", num(c.corpus.length_std)},
        {"uniform_fraction", num(c.corpus.uniform_fraction)},
        {"min_length", num(c.corpus.min_length)},
        {"max_length", num(c.corpus.max_length)},
        {"condition_dim", num(c.corpus.condition_dim)},
        {"condition_noise", num(c.corpus.condition_noise)},
        {"vocab_size", num(c.corpus.vocab_size)},
        {"max_clauses", num(c.corpus.max_clauses)},
        {"duration_per_token", num(c.corpus.duration.per_token)},
        {"duration_per_char", num(c.corpus.duration.per_char)},
        {"seed", num(c.corpus.seed)},
        {"world_seed", num(c.corpus.world_seed)}}},
      {"model",
       {{"scheme", enumeration(c.model.length.scheme, scheme, scheme_name)},
        {"control", enumeration(c.control, [](const std::string& v) { return parse_control_mode(v); },
                                [](ControlMode m) { return to_string(m); })},
        {"max_length", num(c.model.length.max_length)},
        {"length_hidden", list(c.model.length.hidden)},
        {"length_activation", enumeration(c.model.length.activation, activation, activation_name)},
        {"length_bias", boolean(c.model.length.bias)},
        {"table_init_std", num(c.model.length.table_init_std)},
        {"layers", num(c.model.layers)},
        {"heads", num(c.model.heads)},
        {"dim", num(c.model.dim)},
        {"ff_dim", num(c.model.ff_dim)},
        {"max_seq_len", num(c.model.max_seq_len)},
        {"positional", enumeration(c.model.positional, [](const std::string& v) { return parse_positional(v); },
                                   [](PositionalKind p) { return to_string(p); })},
        {"ff_activation", enumeration(c.model.ff_activation, activation, activation_name)}}},
      {"train",
       {{"epochs", num(c.train.epochs)},
        {"batch_size", num(c.train.batch_size)},
        {"accumulation_steps", num(c.train.accumulation_steps)},
        {"learning_rate", num(c.train.learning_rate)},
        {"weight_decay", num(c.train.weight_decay)},
        {"clip_norm", num(c.train.clip_norm)},
        {"seed", num(c.train.seed)}}},
      {"eval",
       {{"strategy", enumeration(c.generation.strategy, [](const std::string& v) { return parse_strategy(v); },
                                 [](Strategy s) { return to_string(s); })},
        {"beam_width", num(c.generation.beam_width)},
        {"top_k", num(c.generation.top_k)},
        {"top_p", num(c.generation.top_p)},
        {"temperature", num(c.generation.temperature)},
        {"seed", num(c.generation.seed)},
        {"samples", num(c.eval_samples)},
        {"targets", list(c.targets)},
        {"sweep_first", num(c.sweep_first)},
        {"sweep_last", num(c.sweep_last)},
        {"sweep_step", num(c.sweep_step)}}},
      {"analysis",
       {{"first", num(c.analysis.first)},
        {"last", num(c.analysis.last)},
        {"top_words", num(c.analysis.top_words)},
        {"probe_words", num(c.analysis.probe_words)},
        {"probe_lengths", list(c.analysis.probe_lengths)},
        {"ica_components", num(c.analysis.ica_components)},
        {"top_responders", num(c.analysis.top_responders)}}},
  };
}

void check(const ExperimentConfig& c) {
  validate(c.corpus);
  validate(c.train);
  GenerationConfig g = c.generation;
  g.mode = c.control;
  g.target = 1.0;
  validate(g);
  if (c.model.max_seq_len < c.corpus.max_length + 1) {
    throw ConfigError("model.max_seq_len must exceed corpus.max_length");
  }
  if (static_cast<std::size_t>(c.corpus.num_samples) <= c.heldout) {
    throw ConfigError("corpus.heldout must be smaller than corpus.num_samples");
  }
  if (!(c.sweep_step > 0.0) || c.sweep_last < c.sweep_first) {
    throw ConfigError("sweep range is empty");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  ExperimentConfig c;
  c.model.length.hidden.clear();
  Schema fields = schema(c);
  std::set<std::string> given;
  std::string section;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      const bool known = std::any_of(fields.begin(), fields.end(),
                                     [&](const auto& s) { return s.first == section; });
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    auto& entries = std::find_if(fields.begin(), fields.end(),
                                 [&](const auto& s) { return s.first == section; })->second;
    const auto it = std::find_if(entries.begin(), entries.end(),
                                 [&](const auto& e) { return e.first == key; });
    if (it == entries.end()) throw ConfigError(where + "unknown key '" + section + "." + key + "'");
    try {
      it->second.set(section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    given.insert(section + "." + key);
  }
  if (seed_override) c.seed = *seed_override;
  if (!given.count("corpus.seed")) c.corpus.seed = c.seed;
  if (!given.count("train.seed")) c.train.seed = c.seed;
  if (!given.count("eval.seed")) c.generation.seed = c.seed;
  if (c.model.length.hidden.empty()) c.model.length.hidden = default_hidden_dims(c.model.length.scheme);
  c.model.condition_dim = c.corpus.condition_dim;
  c.generation.mode = c.control;
  check(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::optional<std::uint64_t> seed;
  if (const char* env = std::getenv("LENCTL_SEED"); env != nullptr && *env != '\0') {
    seed = parse_number<std::uint64_t>("LENCTL_SEED", env);
  }
  ExperimentConfig c = parse_config(text, seed);
  if (const char* env = std::getenv("LENCTL_OUT"); env != nullptr && *env != '\0') c.out = env;
  return c;
}

std::string to_text(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::string out;
  for (const auto& [section, entries] : schema(copy)) {
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (const auto& [key, field] : entries) out += key + " = " + field.get() + "\n";
  }
  return out;
}

void write_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_text(config);
}

std::vector<double> sweep_targets(double first, double last, double step) {
  if (!(step > 0.0) || last < first) throw ConfigError("sweep range is empty");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = first + i * step;
    if (t > last + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

}  // namespace lenctl
