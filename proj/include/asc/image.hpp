#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asc/audio.hpp"
#include "asc/dsp.hpp"

namespace asc {

// 8-bit grayscale image; spectrogram renders are always 224x224.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, top row first
  std::string provenance;

  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Bilinear resample of a row-major matrix, corners aligned. A singleton
// axis is treated as constant.
Mat bilinear_resize(const Mat& src, size_t out_rows, size_t out_cols);

// Min-max normalizes the whole matrix, resamples to size x size, and maps
// to 8-bit grayscale with time left-to-right and the lowest band at the
// bottom row. A constant-valued input renders as all-zero pixels.
GrayImage render_spectrogram_image(const LogMelSpectrogram& lms, int size = 224);

// Amplitude envelope plot, one column per time slice: dark background,
// light span between the column's min and max sample.
GrayImage render_waveform(const AudioClip& clip, int width = 512, int height = 160);

// Minimal PNG writer: 8-bit grayscale, no alpha, zlib-compressed.
std::vector<uint8_t> encode_png_gray8(const GrayImage& image);
void write_png_gray8(const std::filesystem::path& path, const GrayImage& image);

}  // namespace asc
