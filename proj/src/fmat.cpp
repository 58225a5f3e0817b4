#include "asc/fmat.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace asc {

std::vector<uint8_t> encode_fmat(const Fmat& m) {
  if (m.values.size() != m.rows * m.cols)
    throw ArgumentError("fmat: value count does not match rows*cols");
  if (m.fingerprint.find_first_of(" \n") != std::string::npos)
    throw ArgumentError("fmat: fingerprint must not contain spaces or newlines");

  std::string header = "fmat " + std::to_string(m.rows) + " " + std::to_string(m.cols) +
                       " " + m.fingerprint + "\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  const size_t payload = m.values.size() * sizeof(float);
  const size_t base = out.size();
  out.resize(base + payload);
  // Host is little-endian; values are stored verbatim.
  std::memcpy(out.data() + base, m.values.data(), payload);
  return out;
}

Fmat decode_fmat(const std::vector<uint8_t>& bytes) {
  const auto nl = std::find(bytes.begin(), bytes.end(), static_cast<uint8_t>('\n'));
  if (nl == bytes.end()) throw FormatError("fmat: missing header line");
  const std::string header(bytes.begin(), nl);
  std::istringstream hs(header);
  std::string magic;
  Fmat m;
  if (!(hs >> magic >> m.rows >> m.cols >> m.fingerprint) || magic != "fmat")
    throw FormatError("fmat: bad header '" + header + "'");

  const size_t expected = m.rows * m.cols * sizeof(float);
  const size_t available = static_cast<size_t>(bytes.end() - nl) - 1;
  if (available < expected)
    throw TruncationError("fmat: expected " + std::to_string(expected) +
                          " payload bytes, found " + std::to_string(available));
  if (available > expected)
    throw FormatError("fmat: trailing bytes after payload");

  m.values.resize(m.rows * m.cols);
  std::memcpy(m.values.data(), &*(nl + 1), expected);
  return m;
}

void write_fmat(const std::filesystem::path& path, const Fmat& m) {
  const std::vector<uint8_t> bytes = encode_fmat(m);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

Fmat read_fmat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_fmat(bytes);
}

Fmat fmat_from_doubles(size_t rows, size_t cols, const std::vector<double>& values,
                       std::string fingerprint) {
  if (values.size() != rows * cols)
    throw ArgumentError("fmat: value count does not match rows*cols");
  Fmat m;
  m.rows = rows;
  m.cols = cols;
  m.fingerprint = std::move(fingerprint);
  m.values.reserve(values.size());
  for (double v : values) m.values.push_back(static_cast<float>(v));
  return m;
}

}  // namespace asc
