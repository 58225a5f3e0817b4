#include "asc/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace asc {
namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

void append_chunk(std::vector<uint8_t>& out, const char type[5],
                  const std::vector<uint8_t>& body) {
  put_u32be(out, static_cast<uint32_t>(body.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), out.data() + crc_start,
                          static_cast<uInt>(4 + body.size()));
  put_u32be(out, static_cast<uint32_t>(crc));
}

}  // namespace

Mat bilinear_resize(const Mat& src, size_t out_rows, size_t out_cols) {
  if (src.rows == 0 || src.cols == 0)
    throw ArgumentError("bilinear_resize: empty source matrix");
  if (out_rows == 0 || out_cols == 0)
    throw ArgumentError("bilinear_resize: empty target size");

  Mat dst(out_rows, out_cols);
  const double row_step =
      out_rows > 1 ? static_cast<double>(src.rows - 1) / (out_rows - 1) : 0.0;
  const double col_step =
      out_cols > 1 ? static_cast<double>(src.cols - 1) / (out_cols - 1) : 0.0;

  for (size_t r = 0; r < out_rows; ++r) {
    const double sy = row_step * static_cast<double>(r);
    const size_t y0 = std::min(static_cast<size_t>(sy), src.rows - 1);
    const size_t y1 = std::min(y0 + 1, src.rows - 1);
    const double fy = sy - static_cast<double>(y0);
    for (size_t c = 0; c < out_cols; ++c) {
      const double sx = col_step * static_cast<double>(c);
      const size_t x0 = std::min(static_cast<size_t>(sx), src.cols - 1);
      const size_t x1 = std::min(x0 + 1, src.cols - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = src.at(y0, x0) * (1.0 - fx) + src.at(y0, x1) * fx;
      const double bot = src.at(y1, x0) * (1.0 - fx) + src.at(y1, x1) * fx;
      dst.at(r, c) = top * (1.0 - fy) + bot * fy;
    }
  }
  return dst;
}

GrayImage render_spectrogram_image(const LogMelSpectrogram& lms, int size) {
  if (lms.n_frames == 0 || lms.n_mels == 0)
    throw ArgumentError("render_spectrogram_image: empty spectrogram");
  if (size < 1) throw ArgumentError("render_spectrogram_image: size must be >= 1");

  const auto [min_it, max_it] = std::minmax_element(lms.values.begin(), lms.values.end());
  const double lo = *min_it;
  const double span = *max_it - lo;

  // Flip and transpose so rows run high band (top) to low band (bottom) and
  // columns run along time, then scale into [0, 255].
  Mat oriented(lms.n_mels, lms.n_frames);
  for (size_t m = 0; m < lms.n_mels; ++m)
    for (size_t t = 0; t < lms.n_frames; ++t) {
      const double v = lms.values[t * lms.n_mels + (lms.n_mels - 1 - m)];
      oriented.at(m, t) = span > 0.0 ? 255.0 * (v - lo) / span : 0.0;
    }

  const Mat resized =
      bilinear_resize(oriented, static_cast<size_t>(size), static_cast<size_t>(size));

  GrayImage img;
  img.width = size;
  img.height = size;
  img.pixels.resize(static_cast<size_t>(size) * size);
  img.provenance = lms.source_id + "@" + lms.fingerprint;
  for (size_t i = 0; i < resized.v.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>(std::llround(resized.v[i]));
  return img;
}

GrayImage render_waveform(const AudioClip& clip, int width, int height) {
  if (clip.length() == 0) throw ArgumentError("render_waveform: empty clip");
  if (width < 1 || height < 2) throw ArgumentError("render_waveform: bad size");

  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<size_t>(width) * height, 16);
  img.provenance = clip.source_id;

  const size_t n = clip.length();
  for (int x = 0; x < width; ++x) {
    const size_t begin = n * static_cast<size_t>(x) / width;
    const size_t end = std::max(begin + 1, n * (static_cast<size_t>(x) + 1) / width);
    double lo = 1.0, hi = -1.0;
    for (const auto& ch : clip.samples)
      for (size_t i = begin; i < end && i < n; ++i) {
        lo = std::min(lo, ch[i]);
        hi = std::max(hi, ch[i]);
      }
    const int y_hi = static_cast<int>((1.0 - (hi + 1.0) / 2.0) * (height - 1));
    const int y_lo = static_cast<int>((1.0 - (lo + 1.0) / 2.0) * (height - 1));
    for (int y = std::clamp(y_hi, 0, height - 1); y <= std::clamp(y_lo, 0, height - 1); ++y)
      img.pixels[static_cast<size_t>(y) * width + x] = 230;
  }
  return img;
}

std::vector<uint8_t> encode_png_gray8(const GrayImage& image) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<size_t>(image.width) * image.height)
    throw ArgumentError("encode_png_gray8: inconsistent image dimensions");

  // Raw scanlines, each prefixed with filter type 0 (none).
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(image.height) * (image.width + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = image.pixels.data() + static_cast<size_t>(y) * image.width;
    raw.insert(raw.end(), row, row + image.width);
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(comp_size);
  if (compress2(compressed.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw Error("encode_png_gray8: deflate failed");
  compressed.resize(comp_size);

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(image.width));
  put_u32be(ihdr, static_cast<uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

void write_png_gray8(const std::filesystem::path& path, const GrayImage& image) {
  const std::vector<uint8_t> bytes = encode_png_gray8(image);
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

}  // namespace asc
