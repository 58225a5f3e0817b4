#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "asc/augment.hpp"
#include "asc/dsp.hpp"
#include "asc/models.hpp"

namespace asc {

// One JSON file configures a whole run; a single seed governs every stage.
// Absent fields take the defaults below, unknown fields produce warnings.
struct RunConfig {
  uint64_t seed = 42;
  Representation representation = Representation::Spectrogram;
  int jobs = 1;
  double segment_seconds = 5.0;
  int image_size = 224;

  int frame_len = 882;
  int hop = 441;
  int n_fft = 1024;
  int n_mels_spectrogram = 128;
  int n_mels_mfcc = 40;
  int n_coeffs = 20;
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;  // 0 means Nyquist

  AugmentSpec augment;
  double test_fraction = 0.2;
  ModelConfig model;
  TrainConfig train;

  std::vector<std::string> warnings;  // unknown fields seen while parsing
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Canonical form with every default filled in; the fingerprint hashes it.
nlohmann::json run_config_to_json(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

// Re-derives the per-stage seeds from a new run seed.
void apply_seed(RunConfig& cfg, uint64_t seed);

FeatureConfig feature_config_for(const RunConfig& cfg, Representation repr);

// Pipeline identity stamped into feature files for the given representation.
std::string run_feature_fingerprint(const RunConfig& cfg, Representation repr);

}  // namespace asc
