#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "asc/audio.hpp"
#include "asc/rng.hpp"

namespace asc::test {

// Independent O(N^2) DFT oracle for power spectra; deliberately not using
// the library FFT path.
inline std::vector<double> naive_power_spectrum(std::span<const double> frame, int n_fft) {
  const double pi = 3.14159265358979323846;
  std::vector<double> bins(static_cast<size_t>(n_fft) / 2 + 1);
  for (size_t k = 0; k < bins.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (size_t n = 0; n < frame.size(); ++n) {
      const double angle = -2.0 * pi * static_cast<double>(k) * static_cast<double>(n) / n_fft;
      re += frame[n] * std::cos(angle);
      im += frame[n] * std::sin(angle);
    }
    bins[k] = (re * re + im * im) / n_fft;
  }
  return bins;
}

inline AudioClip make_sine_clip(double freq_hz, double amplitude, double seconds,
                                int rate = 44100, const std::string& id = "sine") {
  const double pi = 3.14159265358979323846;
  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.source_id = id;
  clip.samples.resize(1);
  const auto n = static_cast<size_t>(seconds * rate);
  clip.samples[0].resize(n);
  for (size_t i = 0; i < n; ++i)
    clip.samples[0][i] = amplitude * std::sin(2.0 * pi * freq_hz * static_cast<double>(i) / rate);
  return clip;
}

inline AudioClip make_noise_clip(uint64_t seed, double amplitude, double seconds,
                                 int rate = 44100, int channels = 1,
                                 const std::string& id = "noise") {
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.source_id = id;
  clip.samples.resize(static_cast<size_t>(channels));
  const auto n = static_cast<size_t>(seconds * rate);
  for (auto& ch : clip.samples) {
    ch.resize(n);
    for (double& s : ch) s = amplitude * rng.uniform(-1.0, 1.0);
  }
  return clip;
}

// Unique scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    root_ = std::filesystem::temp_directory_path() /
            ("asc_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(root_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(root_, ec);
  }
  const std::filesystem::path& path() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace asc::test
