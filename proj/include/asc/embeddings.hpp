#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asc/error.hpp"

namespace asc {

// Externally generated clip embedding: one 128-value row per second of audio.
struct EmbeddingMatrix {
  size_t n_seconds = 0;
  std::vector<double> values;  // row-major, n_seconds x 128
  std::string clip_id;

  static constexpr size_t kColumns = 128;

  double at(size_t second, size_t col) const { return values[second * kColumns + col]; }
};

// CSV: 128 comma-separated numerals per line, optional leading "# cols=128"
// header. Errors cite the 1-based line number.
EmbeddingMatrix parse_embedding_csv(const std::string& text);

// Values are written with 9 significant digits, enough to round-trip
// float32-precision data exactly.
std::string serialize_embedding_csv(const EmbeddingMatrix& emb);

// Row-major concatenation, length n_seconds * 128.
std::vector<double> flatten_embedding(const EmbeddingMatrix& emb);

// Test stand-in for the external embedding generator: a fixed per-class
// template (uniform in [-1, 1], keyed on class_id only) plus seeded Gaussian
// jitter, quantized to float32 so CSV round trips are exact. Distinct classes
// are linearly separable at low jitter.
EmbeddingMatrix synth_embeddings(int class_id, uint64_t seed, int n_seconds,
                                 double jitter = 0.05);

// Pipeline identity stamped into ingested embedding feature files.
std::string embedding_fingerprint();

}  // namespace asc
