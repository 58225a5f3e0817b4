#include "asc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace asc {
namespace {

uint32_t read_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

struct ParsedWav {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits_per_sample = 0;
  size_t data_offset = 0;
  uint32_t data_size = 0;
};

// Walks the chunk list; requires "fmt " before "data", skips everything else
// (including the pad byte after odd-sized chunks).
ParsedWav parse_wav_header(std::span<const uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("wav: too short for a RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw FormatError("wav: missing RIFF tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: missing WAVE tag");

  ParsedWav wav;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    const uint32_t chunk_size = read_u32le(hdr + 4);
    const size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size())
        throw FormatError("wav: fmt chunk too short");
      const uint8_t* f = bytes.data() + body;
      wav.format = read_u16le(f);
      wav.channels = read_u16le(f + 2);
      wav.sample_rate = read_u32le(f + 4);
      wav.bits_per_sample = read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      wav.data_offset = body;
      wav.data_size = chunk_size;
      if (body + chunk_size > bytes.size())
        throw TruncationError("wav: data chunk declares " + std::to_string(chunk_size) +
                              " bytes, only " + std::to_string(bytes.size() - body) +
                              " available");
      return wav;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  throw FormatError(have_fmt ? "wav: missing data chunk" : "wav: missing fmt chunk");
}

void validate_format(const ParsedWav& wav) {
  if (wav.format != 1)
    throw UnsupportedFormatError("wav: only integer PCM is supported (format tag " +
                                 std::to_string(wav.format) + ")");
  if (wav.bits_per_sample != 16 && wav.bits_per_sample != 24)
    throw UnsupportedFormatError("wav: unsupported bit depth " +
                                 std::to_string(wav.bits_per_sample));
  if (wav.channels < 1 || wav.channels > 2)
    throw UnsupportedFormatError("wav: unsupported channel count " +
                                 std::to_string(wav.channels));
  if (wav.sample_rate == 0) throw FormatError("wav: zero sample rate");
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

AudioClip decode_wav(std::span<const uint8_t> bytes) {
  const ParsedWav wav = parse_wav_header(bytes);
  validate_format(wav);

  const int bytes_per_sample = wav.bits_per_sample / 8;
  const size_t frame_bytes = static_cast<size_t>(bytes_per_sample) * wav.channels;
  const size_t n_frames = wav.data_size / frame_bytes;
  const double scale = 1.0 / static_cast<double>(1 << (wav.bits_per_sample - 1));

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(wav.sample_rate);
  clip.samples.assign(wav.channels, std::vector<double>(n_frames));

  const uint8_t* p = bytes.data() + wav.data_offset;
  for (size_t i = 0; i < n_frames; ++i) {
    for (int ch = 0; ch < wav.channels; ++ch) {
      int32_t code;
      if (wav.bits_per_sample == 16) {
        code = static_cast<int16_t>(p[0] | (p[1] << 8));
        p += 2;
      } else {
        code = p[0] | (p[1] << 8) | (p[2] << 16);
        if (code & 0x800000) code -= 0x1000000;  // sign-extend 24 bits
        p += 3;
      }
      clip.samples[ch][i] = code * scale;
    }
  }
  return clip;
}

WavInfo wav_info(std::span<const uint8_t> bytes) {
  const ParsedWav wav = parse_wav_header(bytes);
  validate_format(wav);
  WavInfo info;
  info.sample_rate_hz = static_cast<int>(wav.sample_rate);
  info.channels = wav.channels;
  info.bit_depth = wav.bits_per_sample;
  info.samples_per_channel =
      wav.data_size / (static_cast<size_t>(wav.bits_per_sample / 8) * wav.channels);
  return info;
}

WavInfo wav_file_info(const std::filesystem::path& path) {
  return wav_info(read_file_bytes(path));
}

std::vector<uint8_t> encode_wav(const AudioClip& clip, const PcmFormat& fmt) {
  if (fmt.bit_depth != 16 && fmt.bit_depth != 24)
    throw ArgumentError("encode_wav: bit depth must be 16 or 24");
  if (fmt.channels != clip.channels())
    throw ArgumentError("encode_wav: clip has " + std::to_string(clip.channels()) +
                        " channels, format wants " + std::to_string(fmt.channels));
  for (const auto& ch : clip.samples)
    for (double s : ch)
      if (!(s >= -1.0 && s <= 1.0))
        throw ArgumentError("encode_wav: sample out of [-1, 1]; clamp before encoding");

  const int bytes_per_sample = fmt.bit_depth / 8;
  const size_t n_frames = clip.length();
  const uint32_t data_size =
      static_cast<uint32_t>(n_frames * fmt.channels * bytes_per_sample);
  const uint32_t byte_rate =
      static_cast<uint32_t>(fmt.sample_rate_hz) * fmt.channels * bytes_per_sample;
  const double full_scale = static_cast<double>(1 << (fmt.bit_depth - 1));
  const int64_t max_code = static_cast<int64_t>(full_scale) - 1;
  const int64_t min_code = -static_cast<int64_t>(full_scale);

  std::vector<uint8_t> out;
  out.reserve(44 + data_size + 1);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32le(out, 36 + data_size + (data_size & 1));
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32le(out, 16);
  put_u16le(out, 1);  // integer PCM
  put_u16le(out, static_cast<uint16_t>(fmt.channels));
  put_u32le(out, static_cast<uint32_t>(fmt.sample_rate_hz));
  put_u32le(out, byte_rate);
  put_u16le(out, static_cast<uint16_t>(fmt.channels * bytes_per_sample));
  put_u16le(out, static_cast<uint16_t>(fmt.bit_depth));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32le(out, data_size);

  for (size_t i = 0; i < n_frames; ++i) {
    for (int ch = 0; ch < fmt.channels; ++ch) {
      int64_t code = std::llround(clip.samples[ch][i] * full_scale);
      code = std::clamp(code, min_code, max_code);
      out.push_back(static_cast<uint8_t>(code & 0xff));
      out.push_back(static_cast<uint8_t>((code >> 8) & 0xff));
      if (fmt.bit_depth == 24) out.push_back(static_cast<uint8_t>((code >> 16) & 0xff));
    }
  }
  if (data_size & 1) out.push_back(0);  // pad to word boundary
  return out;
}

AudioClip read_wav_file(const std::filesystem::path& path) {
  AudioClip clip = decode_wav(read_file_bytes(path));
  clip.source_id = path.stem().string();
  return clip;
}

void write_wav_file(const std::filesystem::path& path, const AudioClip& clip,
                    const PcmFormat& fmt) {
  const std::vector<uint8_t> bytes = encode_wav(clip, fmt);
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

AudioClip downmix_to_mono(const AudioClip& clip) {
  if (clip.channels() == 1) return clip;
  if (clip.channels() != 2)
    throw ArgumentError("downmix_to_mono: expected 1 or 2 channels");
  AudioClip mono;
  mono.sample_rate_hz = clip.sample_rate_hz;
  mono.source_id = clip.source_id;
  mono.samples.resize(1);
  auto& out = mono.samples[0];
  out.resize(clip.length());
  const auto& l = clip.samples[0];
  const auto& r = clip.samples[1];
  for (size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (l[i] + r[i]);
  return mono;
}

SplitResult split_clip(const AudioClip& clip, double segment_seconds) {
  if (!(segment_seconds > 0.0))
    throw ArgumentError("split_clip: segment_seconds must be positive");
  const double exact = segment_seconds * clip.sample_rate_hz;
  const auto seg_len = static_cast<size_t>(std::llround(exact));
  if (seg_len == 0 || std::abs(exact - static_cast<double>(seg_len)) > 1e-9)
    throw ArgumentError("split_clip: segment length is not a whole number of samples");

  SplitResult result;
  const size_t n_segments = clip.length() / seg_len;
  result.remainder_samples = clip.length() - n_segments * seg_len;
  result.segments.reserve(n_segments);
  for (size_t s = 0; s < n_segments; ++s) {
    AudioClip seg;
    seg.sample_rate_hz = clip.sample_rate_hz;
    seg.source_id = clip.source_id + "#" + std::to_string(s);
    seg.samples.resize(clip.channels());
    for (int ch = 0; ch < clip.channels(); ++ch) {
      const auto begin = clip.samples[ch].begin() + static_cast<std::ptrdiff_t>(s * seg_len);
      seg.samples[ch].assign(begin, begin + static_cast<std::ptrdiff_t>(seg_len));
    }
    result.segments.push_back(std::move(seg));
  }
  return result;
}

}  // namespace asc
