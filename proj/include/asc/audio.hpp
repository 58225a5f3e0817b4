#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "asc/error.hpp"

namespace asc {

// Decoded audio: normalized samples in [-1, 1], one vector per channel.
struct AudioClip {
  std::vector<std::vector<double>> samples;  // [channel][sample]
  int sample_rate_hz = 44100;
  std::string source_id;

  int channels() const { return static_cast<int>(samples.size()); }
  size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_seconds() const {
    return static_cast<double>(length()) / sample_rate_hz;
  }
};

// Target PCM encoding for WAV output.
struct PcmFormat {
  int bit_depth = 16;  // 16 or 24
  int channels = 1;
  int sample_rate_hz = 44100;
};

// Summary of a WAV file's header, without decoding the payload.
struct WavInfo {
  int sample_rate_hz = 0;
  int channels = 0;
  int bit_depth = 0;
  size_t samples_per_channel = 0;
};

// Parses a RIFF/WAVE container holding little-endian integer PCM at 16 or
// 24 bits. Samples are normalized by 2^(bit_depth-1) so the most negative
// code maps exactly to -1. Unknown chunks are skipped.
AudioClip decode_wav(std::span<const uint8_t> bytes);

WavInfo wav_info(std::span<const uint8_t> bytes);
WavInfo wav_file_info(const std::filesystem::path& path);

// Quantizes to fmt.bit_depth (round half away from zero, clamped to the code
// range) and emits a canonical RIFF/WAVE container. Samples must already lie
// in [-1, 1].
std::vector<uint8_t> encode_wav(const AudioClip& clip, const PcmFormat& fmt);

AudioClip read_wav_file(const std::filesystem::path& path);

// Writes atomically: temp file in the same directory, then rename.
void write_wav_file(const std::filesystem::path& path, const AudioClip& clip,
                    const PcmFormat& fmt);

// Mono mix-down by per-sample arithmetic mean of the channels.
AudioClip downmix_to_mono(const AudioClip& clip);

struct SplitResult {
  std::vector<AudioClip> segments;
  size_t remainder_samples = 0;  // trailing samples dropped, never padded
};

// Cuts the clip into consecutive segments of exactly segment_seconds each.
// Segment source ids are "<parent>#<index>".
SplitResult split_clip(const AudioClip& clip, double segment_seconds);

}  // namespace asc
