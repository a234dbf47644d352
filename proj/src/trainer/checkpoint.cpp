// SPDX-License-Identifier: Apache-2.0
#include "lenctl/trainer/checkpoint.hpp"

#include "lenctl/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lenctl {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string double_text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string param_file(const std::string& name) { return name + ".f64"; }

const std::string& need(const std::map<std::string, std::string>& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw LoadError("manifest is missing '" + key + "'");
  return it->second;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Model& model,
                     const std::map<std::string, std::string>& extra) {
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string());
  model.vocab.save(dir / "vocab.txt");

  const DecoderConfig& c = model.decoder.config();
  std::ostringstream body;
  body << "format=lenctl-checkpoint\n"
       << "version=" << kCheckpointVersion << '\n'
       << "control=" << to_string(model.control) << '\n'
       << "scheme=" << to_string(c.length.scheme) << '\n'
       << "max_length=" << c.length.max_length << '\n'
       << "length.hidden=" << join(c.length.hidden) << '\n'
       << "length.activation=" << ad::to_string(c.length.activation) << '\n'
       << "length.bias=" << (c.length.bias ? 1 : 0) << '\n'
       << "length.table_init_std=" << double_text(c.length.table_init_std) << '\n'
       << "layers=" << c.layers << '\n'
       << "heads=" << c.heads << '\n'
       << "dim=" << c.dim << '\n'
       << "ff_dim=" << c.ff_dim << '\n'
       << "max_seq_len=" << c.max_seq_len << '\n'
       << "vocab_size=" << c.vocab_size << '\n'
       << "condition_dim=" << c.condition_dim << '\n'
       << "positional=" << to_string(c.positional) << '\n'
       << "ff_activation=" << ad::to_string(c.ff_activation) << '\n'
       << "vocab_hash=" << model.vocab.hash() << '\n';
  for (const auto& [key, value] : extra) body << "meta." << key << '=' << value << '\n';

  const ad::ParameterList params = model.decoder.parameters();
  body << "params=" << params.size() << '\n';
  for (const auto& p : params) {
    const ad::Matrix& v = p.tensor.value();
    const std::string_view bytes(reinterpret_cast<const char*>(v.data()),
                                 static_cast<std::size_t>(v.size()) * sizeof(double));
    std::ofstream out(dir / "params" / param_file(p.name), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write parameter " + p.name);
    body << "param." << p.name << '=' << v.rows() << 'x' << v.cols() << ':' << hex(fnv1a(bytes))
         << '\n';
  }
  const std::string text = body.str();
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  out << text << "checksum=" << hex(fnv1a(text)) << '\n';
  if (!out) throw IoError("cannot write manifest in " + dir.string());
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt", std::ios::binary);
  if (!in) throw LoadError("no manifest in " + dir.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto at = text.rfind("checksum=");
  if (at == std::string::npos || (at > 0 && text[at - 1] != '\n')) {
    throw LoadError("manifest in " + dir.string() + " has no checksum");
  }
  std::string stored = text.substr(at + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != hex(fnv1a(std::string_view(text).substr(0, at)))) {
    throw LoadError("manifest in " + dir.string() + " is corrupted (checksum mismatch)");
  }
  std::map<std::string, std::string> entries;
  std::istringstream lines(text.substr(0, at));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("malformed manifest line '" + line + "'");
    entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (need(entries, "format") != "lenctl-checkpoint") throw LoadError("not a lenctl checkpoint");
  if (need(entries, "version") != std::to_string(kCheckpointVersion)) {
    throw LoadError("checkpoint version " + entries["version"] + " is not supported");
  }
  return entries;
}

Model load_checkpoint(const fs::path& dir) {
  const auto m = read_manifest(dir);
  Vocabulary vocab = Vocabulary::load(dir / "vocab.txt");
  if (vocab.hash() != need(m, "vocab_hash")) {
    throw LoadError("vocabulary hash " + vocab.hash() + " does not match the manifest");
  }
  DecoderConfig c;
  try {
    c.length.scheme = parse_scheme(need(m, "scheme"));
    c.length.max_length = std::stoi(need(m, "max_length"));
    c.length.hidden = split_ints(need(m, "length.hidden"));
    c.length.activation = ad::parse_activation(need(m, "length.activation"));
    c.length.bias = need(m, "length.bias") == "1";
    c.length.table_init_std = std::stod(need(m, "length.table_init_std"));
    c.layers = std::stoi(need(m, "layers"));
    c.heads = std::stoi(need(m, "heads"));
    c.dim = std::stoi(need(m, "dim"));
    c.ff_dim = std::stoi(need(m, "ff_dim"));
    c.max_seq_len = std::stoi(need(m, "max_seq_len"));
    c.vocab_size = std::stoi(need(m, "vocab_size"));
    c.condition_dim = std::stoi(need(m, "condition_dim"));
    c.positional = parse_positional(need(m, "positional"));
    c.ff_activation = ad::parse_activation(need(m, "ff_activation"));
  } catch (const ConfigError& e) {
    throw LoadError(std::string("manifest: ") + e.what());
  } catch (const std::logic_error& e) {
    throw LoadError(std::string("manifest has a malformed number: ") + e.what());
  }
  const ControlMode control = [&] {
    try {
      return parse_control_mode(need(m, "control"));
    } catch (const ConfigError& e) {
      throw LoadError(std::string("manifest: ") + e.what());
    }
  }();
  if (c.vocab_size != vocab.size()) throw LoadError("manifest vocab_size disagrees with vocab.txt");

  Model model = make_model(c, std::move(vocab), control, 0);
  const ad::ParameterList params = model.decoder.parameters();
  if (need(m, "params") != std::to_string(params.size())) {
    throw LoadError("checkpoint has " + m.at("params") + " parameters, model expects " +
                    std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string& entry = need(m, "param." + p.name);
    ad::Matrix& v = p.tensor.node()->value;
    std::ostringstream shape;
    shape << v.rows() << 'x' << v.cols() << ':';
    if (entry.rfind(shape.str(), 0) != 0) {
      throw LoadError("parameter " + p.name + " has shape " + entry + ", expected " + shape.str());
    }
    std::ifstream in(dir / "params" / param_file(p.name), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != static_cast<std::size_t>(v.size()) * sizeof(double)) {
      throw LoadError("parameter file for " + p.name + " is truncated or missing");
    }
    if (entry.substr(shape.str().size()) != hex(fnv1a(bytes))) {
      throw LoadError("parameter file for " + p.name + " does not match its checksum");
    }
    std::memcpy(v.data(), bytes.data(), bytes.size());
  }
  return model;
}

void require_compatible(const Model& model, std::optional<LengthScheme> scheme,
                        std::optional<ControlMode> control) {
  if (scheme && *scheme != model.scheme()) {
    throw LoadError("checkpoint uses scheme " + to_string(model.scheme()) +
                    ", configuration requires " + to_string(*scheme));
  }
  if (control && *control != model.control) {
    throw LoadError("checkpoint controls " + to_string(model.control) +
                    ", configuration requires " + to_string(*control));
  }
}

}  // namespace lenctl
