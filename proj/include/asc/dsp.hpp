#pragma once

#include <span>
#include <string>
#include <vector>

#include "asc/audio.hpp"
#include "asc/error.hpp"

namespace asc {

// Row-major matrix of doubles; the common currency of the feature pipeline.
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(size_t r, size_t c) { return v[r * cols + c]; }
  double at(size_t r, size_t c) const { return v[r * cols + c]; }
  std::span<const double> row(size_t r) const { return {v.data() + r * cols, cols}; }
};

// STFT framing and spectral parameters. Defaults follow 44.1 kHz audio:
// 20 ms frames with a 10 ms hop, zero-padded to a 1024-point FFT.
struct FeatureConfig {
  int frame_len = 882;
  int hop = 441;
  int n_fft = 1024;
  int n_mels = 128;    // 128 for spectrogram images, 40 for MFCC
  int n_coeffs = 20;   // retained cepstral coefficients
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;  // 0 means Nyquist
};

// Floor applied to mel-band energies before the logarithm so silence stays
// finite: log(max(e, kLogEnergyFloor)).
constexpr double kLogEnergyFloor = 1e-10;

struct FrameSequence {
  size_t n_frames = 0;
  size_t frame_len = 0;
  size_t hop = 0;
  std::vector<double> data;  // row-major, n_frames x frame_len

  std::span<const double> frame(size_t i) const {
    return {data.data() + i * frame_len, frame_len};
  }
};

struct PowerSpectrogram {
  size_t n_frames = 0;
  size_t n_bins = 0;  // n_fft/2 + 1
  int n_fft = 0;
  std::vector<double> values;  // row-major
};

struct MelFilterBank {
  size_t n_mels = 0;
  size_t n_bins = 0;
  Mat weights;                          // n_mels x n_bins, in [0, 1]
  std::vector<double> center_freqs_hz;  // strictly increasing
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;
};

struct LogMelSpectrogram {
  size_t n_frames = 0;
  size_t n_mels = 0;
  std::vector<double> values;  // row-major, log energies
  std::string fingerprint;     // feature-config identity
  std::string source_id;
};

struct MfccMatrix {
  size_t n_frames = 0;
  size_t n_coeffs = 0;
  std::vector<double> values;  // row-major
  std::string fingerprint;
  std::string source_id;
};

// Frames start at i*hop; n_frames = floor((L - frame_len)/hop) + 1.
// Frames copy the source samples.
FrameSequence frame_signal(std::span<const double> samples, int frame_len, int hop);

// Periodic Hann: w[k] = 0.5 * (1 - cos(2*pi*k/n)).
std::vector<double> hann_window(int n);

// One-sided power spectrum of a frame zero-padded to n_fft:
// bin k = |X[k]|^2 / n_fft for k in 0..n_fft/2.
std::vector<double> power_spectrum(std::span<const double> frame, int n_fft);

// HTK mel scale.
double mel_scale(double f_hz);
double hz_scale(double mel);

// n_mels triangular filters with unit peak, centers equally spaced on the
// mel axis between f_min and f_max, sampled at FFT-bin center frequencies.
MelFilterBank build_mel_filterbank(int n_mels, int n_fft, int rate_hz, double f_min_hz,
                                   double f_max_hz);

// (n_frames x n_mels) band energies: out[t][m] = sum_k w[m][k] * spec[t][k].
Mat apply_filterbank(const PowerSpectrogram& spec, const MelFilterBank& bank);

// Full pipeline for a mono clip: frame -> Hann -> power spectrum ->
// filterbank -> floored natural log.
LogMelSpectrogram log_mel_spectrogram(const AudioClip& clip, const FeatureConfig& cfg);

// Log mel energies followed by an orthonormal DCT-II across bands; the
// first n_coeffs coefficients are kept.
MfccMatrix mfcc(const AudioClip& clip, const FeatureConfig& cfg);

// Orthonormal DCT-II matrix: D[j][k] = c_j cos(pi*j*(2k+1)/(2m)),
// c_0 = sqrt(1/m), c_j = sqrt(2/m). D * D^T = I.
Mat dct2_matrix(int m);

// Stable identity of a feature configuration (plus the representation name),
// recorded in every derived artifact.
std::string feature_fingerprint(const FeatureConfig& cfg, std::string_view representation);

}  // namespace asc
