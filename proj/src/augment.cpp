#include "asc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "asc/parallel.hpp"

namespace asc {

AudioClip add_noise(const AudioClip& clip, double snr_db, Rng& rng) {
  const size_t n = clip.length();
  double signal_power = 0.0;
  for (const auto& ch : clip.samples)
    for (double s : ch) signal_power += s * s;
  signal_power /= static_cast<double>(n * clip.samples.size());
  if (!(signal_power > 0.0))
    throw ArgumentError("add_noise: silent clip, SNR is undefined");

  // Draw the noise, then rescale it so the realized SNR is exact.
  std::vector<std::vector<double>> noise(clip.samples.size(), std::vector<double>(n));
  double noise_power = 0.0;
  for (auto& ch : noise)
    for (double& v : ch) {
      v = rng.gaussian();
      noise_power += v * v;
    }
  noise_power /= static_cast<double>(n * clip.samples.size());
  const double target_power = signal_power / std::pow(10.0, snr_db / 10.0);
  const double scale = std::sqrt(target_power / noise_power);

  AudioClip out = clip;
  for (size_t c = 0; c < out.samples.size(); ++c)
    for (size_t i = 0; i < n; ++i)
      out.samples[c][i] =
          std::clamp(clip.samples[c][i] + scale * noise[c][i], -1.0, 1.0);
  return out;
}

AudioClip time_shift(const AudioClip& clip, int64_t shift_samples) {
  const auto len = static_cast<int64_t>(clip.length());
  if (std::abs(shift_samples) > len)
    throw ArgumentError("time_shift: |shift| exceeds the clip length");
  if (len == 0) return clip;

  AudioClip out = clip;
  for (size_t c = 0; c < clip.samples.size(); ++c)
    for (int64_t i = 0; i < len; ++i) {
      const int64_t src = ((i - shift_samples) % len + len) % len;
      out.samples[c][i] = clip.samples[c][static_cast<size_t>(src)];
    }
  return out;
}

AudioClip augment_clip(const AudioClip& clip, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.max_shift_seconds > clip.duration_seconds())
    throw ArgumentError("augment: max_shift_seconds exceeds the clip duration");

  const double shift_seconds = rng.uniform(-spec.max_shift_seconds, spec.max_shift_seconds);
  const auto shift = static_cast<int64_t>(std::llround(shift_seconds * clip.sample_rate_hz));
  const double snr_db = rng.uniform(spec.snr_db_low, spec.snr_db_high);

  AudioClip shifted = time_shift(clip, shift);
  return add_noise(shifted, snr_db, rng);
}

DatasetManifest augment_manifest(const DatasetManifest& manifest,
                                 const std::filesystem::path& manifest_dir,
                                 const AugmentSpec& spec,
                                 const std::filesystem::path& out_dir, int jobs) {
  namespace fs = std::filesystem;
  spec.validate();
  for (const auto& e : manifest.entries)
    if (e.augmented)
      throw ArgumentError("augment_manifest: input already contains augmented entries");

  fs::create_directories(out_dir);

  std::vector<ManifestEntry> augmented(manifest.size());
  parallel_for(manifest.size(), jobs, [&](size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    const fs::path src = manifest_dir / e.path;
    if (!fs::exists(src)) throw IoError("augment_manifest: missing file " + src.string());

    AudioClip clip = read_wav_file(src);
    Rng rng = rng_for_entry(spec.seed, e.id());
    const AudioClip variant = augment_clip(clip, spec, rng);

    const std::string out_name = e.id() + "_aug.wav";
    PcmFormat fmt{spec.bit_depth, variant.channels(), variant.sample_rate_hz};
    write_wav_file(out_dir / out_name, variant, fmt);

    ManifestEntry v;
    v.path = out_name;
    v.subclass = e.subclass;
    v.split = e.split;
    v.augmented = true;
    v.parent_id = e.parent_id;
    augmented[i] = std::move(v);
  });

  DatasetManifest out;
  out.entries.reserve(manifest.size() * 2);
  for (const auto& e : manifest.entries) {
    ManifestEntry rebased = e;
    rebased.path =
        (manifest_dir / e.path).lexically_proximate(out_dir).generic_string();
    out.entries.push_back(std::move(rebased));
  }
  for (auto& v : augmented) out.entries.push_back(std::move(v));
  return out;
}

}  // namespace asc
