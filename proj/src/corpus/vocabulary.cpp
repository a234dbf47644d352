// SPDX-License-Identifier: Apache-2.0
#include "lenctl/corpus/vocabulary.hpp"

#include "lenctl/decoder/decoder.hpp"
#include "lenctl/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lenctl {

namespace {

const char* const kSpecialNames[kNumSpecials] = {"<bos>", "<eos>", "<pad>", "<unk>"};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'';
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    if (text[i] == ' ' && i + 1 < text.size() && text[i + 1] != ' ') {
      ++i;  // a single space binds to the following chunk
    }
    if (is_word_char(text[i])) {
      while (i < text.size() && is_word_char(text[i])) ++i;
    } else {
      ++i;
    }
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

Vocabulary Vocabulary::train(std::span<const std::string> texts, int target_size) {
  std::map<std::string, long> chunk_counts;
  std::set<char> alphabet;
  for (const auto& text : texts) {
    for (auto chunk : pretokenize(text)) {
      ++chunk_counts[std::string(chunk)];
      alphabet.insert(chunk.begin(), chunk.end());
    }
  }
  std::vector<std::string> tokens;
  for (char c : alphabet) tokens.emplace_back(1, c);

  // Each distinct chunk as its current symbol sequence.
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [chunk, count] : chunk_counts) {
    std::vector<std::string> symbols;
    for (char c : chunk) symbols.emplace_back(1, c);
    words.emplace_back(std::move(symbols), count);
  }

  std::vector<Merge> merges;
  while (static_cast<int>(tokens.size()) + kNumSpecials < target_size) {
    std::map<Merge, long> pair_counts;
    for (const auto& [symbols, count] : words) {
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        pair_counts[{symbols[i], symbols[i + 1]}] += count;
      }
    }
    const Merge* best = nullptr;
    long best_count = 1;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr) break;
    const Merge merge = *best;
    const std::string joined = merge.first + merge.second;
    for (auto& [symbols, count] : words) {
      std::vector<std::string> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == merge.first &&
            symbols[i + 1] == merge.second) {
          next.push_back(joined);
          ++i;
        } else {
          next.push_back(symbols[i]);
        }
      }
      symbols = std::move(next);
    }
    merges.push_back(merge);
    tokens.push_back(joined);
  }
  return from_parts(std::move(tokens), std::move(merges));
}

Vocabulary Vocabulary::from_parts(std::vector<std::string> tokens, std::vector<Merge> merges) {
  Vocabulary v;
  for (const char* name : kSpecialNames) v.tokens_.emplace_back(name);
  v.tokens_.insert(v.tokens_.end(), std::make_move_iterator(tokens.begin()),
                   std::make_move_iterator(tokens.end()));
  v.merges_ = std::move(merges);
  v.index();
  return v;
}

void Vocabulary::index() {
  ids_.clear();
  longest_ = 1;
  for (int id = kNumSpecials; id < size(); ++id) {
    const auto& t = tokens_[static_cast<std::size_t>(id)];
    if (t.empty()) throw LoadError("vocabulary contains an empty token");
    if (!ids_.emplace(t, id).second) {
      throw LoadError("vocabulary contains duplicate token '" + t + "'");
    }
    longest_ = std::max(longest_, t.size());
  }
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocabulary::find(std::string_view piece) const {
  const auto it = ids_.find(std::string(piece));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  std::size_t unknown = 0;
  std::string buffer;
  for (auto chunk : pretokenize(text)) {
    std::size_t pos = 0;
    while (pos < chunk.size()) {
      std::size_t len = std::min(longest_, chunk.size() - pos);
      int id = kUnk;
      for (; len > 0; --len) {
        buffer.assign(chunk.substr(pos, len));
        const auto it = ids_.find(buffer);
        if (it != ids_.end()) {
          id = it->second;
          break;
        }
      }
      if (id == kUnk) {
        ++unknown;
        len = 1;
      }
      ids.push_back(id);
      pos += len;
    }
  }
  if (unknown > 0) {
    warn(std::to_string(unknown) + " unknown character(s) replaced by <unk>");
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string text;
  for (int id : ids) {
    if (is_special(id)) continue;
    text += token(id);
  }
  return text;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& t : tokens_) {
    h = fnv1a(h, t);
    h = fnv1a(h, std::string_view("\x1f", 1));
  }
  for (const auto& [a, b] : merges_) {
    h = fnv1a(h, a);
    h = fnv1a(h, std::string_view("\x1e", 1));
    h = fnv1a(h, b);
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  out << "lenctl-vocab 1\n";
  out << "tokens " << (tokens_.size() - kNumSpecials) << '\n';
  for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) {
    out << nlohmann::json(tokens_[i]).dump() << '\n';
  }
  out << "merges " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) {
    out << nlohmann::json::array({a, b}).dump() << '\n';
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read vocabulary " + path.string());
  std::string line, word;
  std::size_t count = 0;
  if (!std::getline(in, line) || line != "lenctl-vocab 1") {
    throw LoadError("vocabulary " + path.string() + ": bad header");
  }
  try {
    std::vector<std::string> tokens;
    std::vector<Merge> merges;
    std::getline(in, line);
    std::istringstream(line) >> word >> count;
    if (word != "tokens") throw LoadError("missing token section");
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw LoadError("truncated token list");
      tokens.push_back(nlohmann::json::parse(line).get<std::string>());
    }
    std::getline(in, line);
    word.clear();
    count = 0;
    std::istringstream(line) >> word >> count;
    if (word != "merges") throw LoadError("missing merge section");
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw LoadError("truncated merge list");
      const auto pair = nlohmann::json::parse(line);
      merges.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    return from_parts(std::move(tokens), std::move(merges));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("vocabulary " + path.string() + ": " + e.what());
  }
}

int count_tokens(const Vocabulary& vocab, std::span<const int> ids) {
  const std::string text = vocab.decode(ids);
  if (text.empty()) return 0;
  return static_cast<int>(vocab.encode(text).size());
}

double duration_oracle(const Vocabulary& vocab, std::span<const int> ids,
                       const DurationModel& model) {
  long tokens = 0;
  long chars = 0;
  for (int id : ids) {
    if (is_special(id)) continue;
    const auto& piece = vocab.token(id);
    ++tokens;
    chars += std::count_if(piece.begin(), piece.end(), [](char c) { return c != ' '; });
  }
  return model.per_token * static_cast<double>(tokens) +
         model.per_char * static_cast<double>(chars);
}

}  // namespace lenctl
