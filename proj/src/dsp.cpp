#include "asc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>

#include "asc/fft.hpp"
#include "asc/rng.hpp"

namespace asc {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Shared by log_mel_spectrogram and mfcc: windowed frames -> power spectra.
PowerSpectrogram stft_power(std::span<const double> samples, const FeatureConfig& cfg) {
  const FrameSequence frames = frame_signal(samples, cfg.frame_len, cfg.hop);
  if (cfg.n_fft < cfg.frame_len)
    throw ArgumentError("stft: n_fft smaller than the frame length");
  const std::vector<double> window = hann_window(cfg.frame_len);
  const Fft fft(cfg.n_fft);

  PowerSpectrogram spec;
  spec.n_frames = frames.n_frames;
  spec.n_bins = static_cast<size_t>(cfg.n_fft) / 2 + 1;
  spec.n_fft = cfg.n_fft;
  spec.values.resize(spec.n_frames * spec.n_bins);

  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.n_fft));
  const double scale = 1.0 / cfg.n_fft;
  for (size_t t = 0; t < frames.n_frames; ++t) {
    const auto frame = frames.frame(t);
    for (size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i] * window[i];
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(frame.size()), buf.end(),
              std::complex<double>(0.0, 0.0));
    fft.transform(buf);
    double* out = spec.values.data() + t * spec.n_bins;
    for (size_t k = 0; k < spec.n_bins; ++k) out[k] = std::norm(buf[k]) * scale;
  }
  return spec;
}

Mat floored_log_mel_energies(const AudioClip& clip, const FeatureConfig& cfg,
                             int n_mels) {
  if (clip.channels() != 1)
    throw ArgumentError("feature extraction expects a mono clip; downmix first");
  const PowerSpectrogram spec = stft_power(clip.samples[0], cfg);
  const double f_max = cfg.f_max_hz > 0.0 ? cfg.f_max_hz : clip.sample_rate_hz / 2.0;
  const MelFilterBank bank =
      build_mel_filterbank(n_mels, cfg.n_fft, clip.sample_rate_hz, cfg.f_min_hz, f_max);
  Mat energies = apply_filterbank(spec, bank);
  for (double& e : energies.v) e = std::log(std::max(e, kLogEnergyFloor));
  return energies;
}

}  // namespace

FrameSequence frame_signal(std::span<const double> samples, int frame_len, int hop) {
  if (frame_len < 1) throw ArgumentError("frame_signal: frame_len must be >= 1");
  if (hop < 1) throw ArgumentError("frame_signal: hop must be >= 1");
  if (samples.size() < static_cast<size_t>(frame_len))
    throw ArgumentError("frame_signal: signal too short; need at least " +
                        std::to_string(frame_len) + " samples, got " +
                        std::to_string(samples.size()));

  FrameSequence seq;
  seq.frame_len = static_cast<size_t>(frame_len);
  seq.hop = static_cast<size_t>(hop);
  seq.n_frames = (samples.size() - seq.frame_len) / seq.hop + 1;
  seq.data.resize(seq.n_frames * seq.frame_len);
  for (size_t i = 0; i < seq.n_frames; ++i)
    std::copy_n(samples.data() + i * seq.hop, seq.frame_len,
                seq.data.data() + i * seq.frame_len);
  return seq;
}

std::vector<double> hann_window(int n) {
  if (n < 2) throw ArgumentError("hann_window: n must be >= 2");
  std::vector<double> w(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) w[k] = 0.5 * (1.0 - std::cos(2.0 * kPi * k / n));
  return w;
}

std::vector<double> power_spectrum(std::span<const double> frame, int n_fft) {
  if (!is_power_of_two(n_fft))
    throw ArgumentError("power_spectrum: n_fft must be a power of two");
  if (static_cast<size_t>(n_fft) < frame.size())
    throw ArgumentError("power_spectrum: n_fft smaller than the frame");

  std::vector<std::complex<double>> buf(static_cast<size_t>(n_fft));
  for (size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  Fft(n_fft).transform(buf);

  std::vector<double> bins(static_cast<size_t>(n_fft) / 2 + 1);
  const double scale = 1.0 / n_fft;
  for (size_t k = 0; k < bins.size(); ++k) bins[k] = std::norm(buf[k]) * scale;
  return bins;
}

double mel_scale(double f_hz) {
  if (f_hz < 0.0) throw ArgumentError("mel_scale: negative frequency");
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double hz_scale(double mel) {
  if (mel < 0.0) throw ArgumentError("hz_scale: negative mel value");
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterBank build_mel_filterbank(int n_mels, int n_fft, int rate_hz, double f_min_hz,
                                   double f_max_hz) {
  if (n_mels < 2) throw ArgumentError("mel filterbank: n_mels must be >= 2");
  if (!(0.0 <= f_min_hz && f_min_hz < f_max_hz && f_max_hz <= rate_hz / 2.0))
    throw ArgumentError("mel filterbank: need 0 <= f_min < f_max <= rate/2");
  if (!is_power_of_two(n_fft))
    throw ArgumentError("mel filterbank: n_fft must be a power of two");

  // n_mels + 2 edge points equally spaced on the mel axis; edge m, m+1, m+2
  // delimit filter m's triangle in Hz.
  const double mel_lo = mel_scale(f_min_hz);
  const double mel_hi = mel_scale(f_max_hz);
  std::vector<double> edges_hz(static_cast<size_t>(n_mels) + 2);
  for (size_t i = 0; i < edges_hz.size(); ++i)
    edges_hz[i] = hz_scale(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        (n_mels + 1));

  MelFilterBank bank;
  bank.n_mels = static_cast<size_t>(n_mels);
  bank.n_bins = static_cast<size_t>(n_fft) / 2 + 1;
  bank.f_min_hz = f_min_hz;
  bank.f_max_hz = f_max_hz;
  bank.weights = Mat(bank.n_mels, bank.n_bins);
  bank.center_freqs_hz.assign(edges_hz.begin() + 1, edges_hz.end() - 1);

  const double bin_hz = static_cast<double>(rate_hz) / n_fft;
  for (size_t m = 0; m < bank.n_mels; ++m) {
    const double lo = edges_hz[m];
    const double center = edges_hz[m + 1];
    const double hi = edges_hz[m + 2];
    for (size_t k = 0; k < bank.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > lo && f < hi)
        w = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
      bank.weights.at(m, k) = w;
    }
  }
  return bank;
}

Mat apply_filterbank(const PowerSpectrogram& spec, const MelFilterBank& bank) {
  if (spec.n_bins != bank.n_bins)
    throw ArgumentError("apply_filterbank: spectrogram has " +
                        std::to_string(spec.n_bins) + " bins, bank expects " +
                        std::to_string(bank.n_bins));
  Mat out(spec.n_frames, bank.n_mels);
  for (size_t t = 0; t < spec.n_frames; ++t) {
    const double* row = spec.values.data() + t * spec.n_bins;
    for (size_t m = 0; m < bank.n_mels; ++m) {
      const double* w = bank.weights.v.data() + m * bank.n_bins;
      double acc = 0.0;
      for (size_t k = 0; k < bank.n_bins; ++k) acc += w[k] * row[k];
      out.at(t, m) = acc;
    }
  }
  return out;
}

LogMelSpectrogram log_mel_spectrogram(const AudioClip& clip, const FeatureConfig& cfg) {
  const Mat energies = floored_log_mel_energies(clip, cfg, cfg.n_mels);
  LogMelSpectrogram lms;
  lms.n_frames = energies.rows;
  lms.n_mels = energies.cols;
  lms.values = energies.v;
  lms.fingerprint = feature_fingerprint(cfg, "spectrogram");
  lms.source_id = clip.source_id;
  return lms;
}

MfccMatrix mfcc(const AudioClip& clip, const FeatureConfig& cfg) {
  if (cfg.n_coeffs > cfg.n_mels)
    throw ArgumentError("mfcc: n_coeffs (" + std::to_string(cfg.n_coeffs) +
                        ") exceeds n_mels (" + std::to_string(cfg.n_mels) + ")");
  const Mat log_energies = floored_log_mel_energies(clip, cfg, cfg.n_mels);
  const Mat dct = dct2_matrix(cfg.n_mels);

  MfccMatrix out;
  out.n_frames = log_energies.rows;
  out.n_coeffs = static_cast<size_t>(cfg.n_coeffs);
  out.values.resize(out.n_frames * out.n_coeffs);
  out.fingerprint = feature_fingerprint(cfg, "mfcc");
  out.source_id = clip.source_id;
  for (size_t t = 0; t < out.n_frames; ++t) {
    const double* e = log_energies.v.data() + t * log_energies.cols;
    for (size_t j = 0; j < out.n_coeffs; ++j) {
      double acc = 0.0;
      const double* d = dct.v.data() + j * dct.cols;
      for (size_t k = 0; k < dct.cols; ++k) acc += d[k] * e[k];
      out.values[t * out.n_coeffs + j] = acc;
    }
  }
  return out;
}

Mat dct2_matrix(int m) {
  if (m < 1) throw ArgumentError("dct2_matrix: m must be >= 1");
  Mat d(static_cast<size_t>(m), static_cast<size_t>(m));
  const double c0 = std::sqrt(1.0 / m);
  const double cj = std::sqrt(2.0 / m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      d.at(static_cast<size_t>(j), static_cast<size_t>(k)) =
          (j == 0 ? c0 : cj) * std::cos(kPi * j * (2 * k + 1) / (2.0 * m));
  return d;
}

std::string feature_fingerprint(const FeatureConfig& cfg, std::string_view representation) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%.*s;frame=%d;hop=%d;n_fft=%d;n_mels=%d;n_coeffs=%d;fmin=%g;fmax=%g",
                static_cast<int>(representation.size()), representation.data(),
                cfg.frame_len, cfg.hop, cfg.n_fft, cfg.n_mels, cfg.n_coeffs, cfg.f_min_hz,
                cfg.f_max_hz);
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(buf)));
  return out;
}

}  // namespace asc
