// SPDX-License-Identifier: Apache-2.0
#include "lenctl/analysis/similarity.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lenctl {

namespace {

void check_range(int first, int last, int max_length) {
  if (first < 1 || last > max_length || first > last) {
    throw RangeError("length range [" + std::to_string(first) + ", " + std::to_string(last) +
                     "] outside [1, " + std::to_string(max_length) + "]");
  }
}

std::vector<int> span_of(int first, int last) {
  std::vector<int> out;
  for (int k = first; k <= last; ++k) out.push_back(k);
  return out;
}

/// Blue at -1, white at 0, red at +1.
std::string color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (v >= 0.0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - v)));
  } else {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + v)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

ad::Matrix code_matrix(LengthScheme scheme, int max_length, int first, int last) {
  check_range(first, last, max_length);
  ad::Matrix out(last - first + 1, code_width(scheme, max_length));
  for (int k = first; k <= last; ++k) out.row(k - first) = encode_length(k, max_length, scheme).vector;
  return out;
}

ad::Matrix embedding_matrix(const LengthEmbedder& embedder, int first, int last) {
  const auto& cfg = embedder.config();
  check_range(first, last, cfg.max_length);
  std::vector<LengthCode> codes;
  for (int k = first; k <= last; ++k) codes.push_back(encode_length(k, cfg.max_length, cfg.scheme));
  return embedder.embed_batch(codes).value();
}

std::pair<SimilarityMatrix, SimilarityMatrix> similarity_matrices(const LengthEmbedder& embedder,
                                                                  int first, int last) {
  const auto& cfg = embedder.config();
  SimilarityMatrix codes{span_of(first, last),
                         cosine_similarity(code_matrix(cfg.scheme, cfg.max_length, first, last))};
  SimilarityMatrix embeddings{span_of(first, last),
                              cosine_similarity(embedding_matrix(embedder, first, last))};
  return {std::move(codes), std::move(embeddings)};
}

void write_similarity_csv(const std::filesystem::path& path, const SimilarityMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "k";
  for (int k : m.lengths) out << ',' << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.lengths.size(); ++i) {
    out << m.lengths[i];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.9f", m.values(static_cast<Eigen::Index>(i), j));
      out << buf;
    }
    out << '\n';
  }
}

std::string similarity_svg(const SimilarityMatrix& m, const std::string& title, int tick) {
  const int n = static_cast<int>(m.lengths.size());
  const int cell = std::max(2, 600 / std::max(n, 1));
  const int margin = 40;
  const int size = margin + n * cell + 10;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<text x=\"" << margin << "\" y=\"14\">" << title << "</text>\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      svg << "<rect x=\"" << margin + j * cell << "\" y=\"" << margin + i * cell << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"" << color(m.values(i, j)) << "\"/>\n";
    }
  }
  for (int i = 0; i < n; ++i) {
    if (tick <= 0 || m.lengths[static_cast<std::size_t>(i)] % tick != 0) continue;
    const int at = margin + i * cell + cell / 2;
    svg << "<text x=\"" << at << "\" y=\"" << margin - 4 << "\" text-anchor=\"middle\">"
        << m.lengths[static_cast<std::size_t>(i)] << "</text>\n";
    svg << "<text x=\"" << margin - 4 << "\" y=\"" << at + 3 << "\" text-anchor=\"end\">"
        << m.lengths[static_cast<std::size_t>(i)] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_embedding_csv(const std::filesystem::path& path, LengthScheme scheme,
                         const std::vector<int>& lengths, const ad::Matrix& embeddings) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "scheme,k";
  for (Eigen::Index j = 0; j < embeddings.cols(); ++j) out << ",e" << j;
  out << '\n';
  char buf[40];
  const std::string name = to_string(scheme);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    out << name << ',' << lengths[i];
    for (Eigen::Index j = 0; j < embeddings.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", embeddings(static_cast<Eigen::Index>(i), j));
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  EmbeddingTable table;
  std::vector<std::vector<double>> rows;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream cells(line);
      std::string cell;
      std::getline(cells, cell, ',');
      table.scheme = parse_scheme(cell);
      std::getline(cells, cell, ',');
      table.lengths.push_back(std::stoi(cell));
      rows.emplace_back();
      while (std::getline(cells, cell, ',')) rows.back().push_back(std::stod(cell));
      if (rows.back().size() != rows.front().size()) {
        throw LoadError("ragged embedding CSV " + path.string());
      }
    }
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw LoadError(path.string() + ": malformed number");
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

}  // namespace lenctl
