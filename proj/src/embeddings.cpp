#include "asc/embeddings.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "asc/rng.hpp"

namespace asc {

EmbeddingMatrix parse_embedding_csv(const std::string& text) {
  EmbeddingMatrix emb;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header_allowed && line[0] == '#') {
      header_allowed = false;
      continue;
    }
    header_allowed = false;

    size_t count = 0;
    size_t pos = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string token = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double value = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0')
        throw FormatError("embedding csv: line " + std::to_string(line_no) +
                          ": non-numeric token '" + token + "'");
      emb.values.push_back(value);
      ++count;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (count != EmbeddingMatrix::kColumns) {
      emb.values.resize(emb.values.size() - count);
      throw FormatError("embedding csv: line " + std::to_string(line_no) + ": expected " +
                        std::to_string(EmbeddingMatrix::kColumns) + " columns, found " +
                        std::to_string(count));
    }
    ++emb.n_seconds;
  }
  if (emb.n_seconds == 0) throw FormatError("embedding csv: no data rows");
  return emb;
}

std::string serialize_embedding_csv(const EmbeddingMatrix& emb) {
  std::string out = "# cols=128\n";
  char buf[40];
  for (size_t t = 0; t < emb.n_seconds; ++t) {
    for (size_t c = 0; c < EmbeddingMatrix::kColumns; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", emb.at(t, c));
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<double> flatten_embedding(const EmbeddingMatrix& emb) {
  return emb.values;
}

std::string embedding_fingerprint() {
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64("embedding;cols=128")));
  return out;
}

EmbeddingMatrix synth_embeddings(int class_id, uint64_t seed, int n_seconds,
                                 double jitter) {
  if (n_seconds < 1) throw ArgumentError("synth_embeddings: n_seconds must be >= 1");

  // The template depends on the class only, so every clip of a class shares
  // the same mean pattern.
  Rng template_rng(0xa5c0ffee00000000ULL ^ static_cast<uint64_t>(class_id));
  std::vector<double> tmpl(EmbeddingMatrix::kColumns);
  for (double& v : tmpl) v = template_rng.uniform(-1.0, 1.0);

  Rng jitter_rng(seed);
  EmbeddingMatrix emb;
  emb.n_seconds = static_cast<size_t>(n_seconds);
  emb.values.resize(emb.n_seconds * EmbeddingMatrix::kColumns);
  for (size_t t = 0; t < emb.n_seconds; ++t)
    for (size_t c = 0; c < EmbeddingMatrix::kColumns; ++c) {
      const double v = tmpl[c] + jitter * jitter_rng.gaussian();
      emb.values[t * EmbeddingMatrix::kColumns + c] = static_cast<float>(v);
    }
  return emb;
}

}  // namespace asc
