#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "asc/error.hpp"

namespace asc {

// Persisted feature matrix: one text header line "fmat <rows> <cols> <fingerprint>"
// followed by rows*cols row-major 32-bit little-endian IEEE-754 values.
struct Fmat {
  size_t rows = 0;
  size_t cols = 0;
  std::string fingerprint;
  std::vector<float> values;
};

std::vector<uint8_t> encode_fmat(const Fmat& m);
Fmat decode_fmat(const std::vector<uint8_t>& bytes);

// File writes are atomic (temp file then rename).
void write_fmat(const std::filesystem::path& path, const Fmat& m);
Fmat read_fmat(const std::filesystem::path& path);

Fmat fmat_from_doubles(size_t rows, size_t cols, const std::vector<double>& values,
                       std::string fingerprint);

}  // namespace asc
