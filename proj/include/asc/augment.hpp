#pragma once

#include <cstdint>
#include <filesystem>

#include "asc/audio.hpp"
#include "asc/dataset.hpp"
#include "asc/rng.hpp"

namespace asc {

struct AugmentSpec {
  double snr_db_low = 20.0;
  double snr_db_high = 40.0;
  double max_shift_seconds = 0.5;
  uint64_t seed = 0;
  int bit_depth = 16;  // for augmented WAV output

  void validate() const {
    if (snr_db_low > snr_db_high)
      throw ArgumentError("augment: snr_db range is inverted");
    if (max_shift_seconds < 0.0)
      throw ArgumentError("augment: max_shift_seconds must be >= 0");
  }
};

// Adds zero-mean white Gaussian noise rescaled so the realized SNR equals
// the request exactly (before the final clamp to [-1, 1]).
AudioClip add_noise(const AudioClip& clip, double snr_db, Rng& rng);

// Circular rotation: out[i] = in[(i - shift) mod L]. Energy-preserving.
AudioClip time_shift(const AudioClip& clip, int64_t shift_samples);

// One augmentation draw: shift uniform in +-max_shift, then noise at an SNR
// uniform in [low, high]. The caller supplies the per-entry stream.
AudioClip augment_clip(const AudioClip& clip, const AugmentSpec& spec, Rng& rng);

// Doubles the dataset: every entry gains one augmented variant, written to
// out_dir as "<id>_aug.wav". Variant streams are keyed on (seed, entry id),
// so results do not depend on manifest order. Paths in the result are
// relative to manifest_dir.
DatasetManifest augment_manifest(const DatasetManifest& manifest,
                                 const std::filesystem::path& manifest_dir,
                                 const AugmentSpec& spec,
                                 const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace asc
