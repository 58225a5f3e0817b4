#include "asc/config.hpp"

#include <fstream>

#include "asc/embeddings.hpp"

namespace asc {

using nlohmann::json;

namespace {

void warn_unknown(const json& obj, const std::string& section,
                  std::initializer_list<const char*> known,
                  std::vector<std::string>& warnings) {
  for (const auto& [key, value] : obj.items()) {
    bool found = false;
    for (const char* k : known)
      if (key == k) {
        found = true;
        break;
      }
    if (!found)
      warnings.push_back("unknown config field '" + section + key + "' ignored");
  }
}

template <typename T>
void read_field(const json& obj, const std::string& section, const char* key, T& out,
                const char* type_name) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + section + key + "': expected " + type_name);
  }
}

void validate(const RunConfig& cfg) {
  if (cfg.jobs < 1) throw ConfigError("config field 'jobs': must be >= 1");
  if (!(cfg.segment_seconds > 0.0))
    throw ConfigError("config field 'segment_seconds': must be positive");
  if (cfg.image_size < 1) throw ConfigError("config field 'image_size': must be >= 1");
  if (cfg.frame_len < 1) throw ConfigError("config field 'features.frame_len': must be >= 1");
  if (cfg.hop < 1) throw ConfigError("config field 'features.hop': must be >= 1");
  if (!is_power_of_two(cfg.n_fft))
    throw ConfigError("config field 'features.n_fft': must be a power of two");
  if (cfg.n_fft < cfg.frame_len)
    throw ConfigError("config field 'features.n_fft': must be >= frame_len");
  if (cfg.n_coeffs < 1 || cfg.n_coeffs > cfg.n_mels_mfcc)
    throw ConfigError("config field 'features.n_coeffs': must lie in [1, n_mels_mfcc]");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("config field 'split.test_fraction': must lie in (0, 1)");
  if (cfg.augment.snr_db_low > cfg.augment.snr_db_high)
    throw ConfigError("config field 'augment.snr_db_low': exceeds snr_db_high");
  if (cfg.augment.max_shift_seconds < 0.0)
    throw ConfigError("config field 'augment.max_shift_seconds': must be >= 0");
  if (cfg.augment.bit_depth != 16 && cfg.augment.bit_depth != 24)
    throw ConfigError("config field 'augment.bit_depth': must be 16 or 24");
  cfg.train.validate();
}

}  // namespace

void apply_seed(RunConfig& cfg, uint64_t seed) {
  cfg.seed = seed;
  cfg.augment.seed = seed ^ fnv1a64("augment");
  cfg.model.seed = seed ^ fnv1a64("model-init");
  cfg.train.seed = seed ^ fnv1a64("train-shuffle");
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig cfg;

  warn_unknown(j, "", {"seed", "representation", "jobs", "segment_seconds", "image_size",
                       "features", "augment", "split", "model", "train"},
               cfg.warnings);

  uint64_t seed = cfg.seed;
  read_field(j, "", "seed", seed, "unsigned integer");
  read_field(j, "", "jobs", cfg.jobs, "integer");
  read_field(j, "", "segment_seconds", cfg.segment_seconds, "number");
  read_field(j, "", "image_size", cfg.image_size, "integer");
  std::string repr = representation_name(cfg.representation);
  read_field(j, "", "representation", repr, "string");
  try {
    cfg.representation = parse_representation(repr);
  } catch (const Error&) {
    throw ConfigError("config field 'representation': expected one of "
                      "spectrogram|mfcc|embedding");
  }

  if (const auto it = j.find("features"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'features': expected object");
    warn_unknown(*it, "features.",
                 {"frame_len", "hop", "n_fft", "n_mels_spectrogram", "n_mels_mfcc",
                  "n_coeffs", "f_min_hz", "f_max_hz"},
                 cfg.warnings);
    read_field(*it, "features.", "frame_len", cfg.frame_len, "integer");
    read_field(*it, "features.", "hop", cfg.hop, "integer");
    read_field(*it, "features.", "n_fft", cfg.n_fft, "integer");
    read_field(*it, "features.", "n_mels_spectrogram", cfg.n_mels_spectrogram, "integer");
    read_field(*it, "features.", "n_mels_mfcc", cfg.n_mels_mfcc, "integer");
    read_field(*it, "features.", "n_coeffs", cfg.n_coeffs, "integer");
    read_field(*it, "features.", "f_min_hz", cfg.f_min_hz, "number");
    read_field(*it, "features.", "f_max_hz", cfg.f_max_hz, "number");
  }

  if (const auto it = j.find("augment"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'augment': expected object");
    warn_unknown(*it, "augment.",
                 {"snr_db_low", "snr_db_high", "max_shift_seconds", "bit_depth"},
                 cfg.warnings);
    read_field(*it, "augment.", "snr_db_low", cfg.augment.snr_db_low, "number");
    read_field(*it, "augment.", "snr_db_high", cfg.augment.snr_db_high, "number");
    read_field(*it, "augment.", "max_shift_seconds", cfg.augment.max_shift_seconds,
               "number");
    read_field(*it, "augment.", "bit_depth", cfg.augment.bit_depth, "integer");
  }

  if (const auto it = j.find("split"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'split': expected object");
    warn_unknown(*it, "split.", {"test_fraction"}, cfg.warnings);
    read_field(*it, "split.", "test_fraction", cfg.test_fraction, "number");
  }

  // 64x64 grids keep the default autoencoder widths (4096-...) coherent.
  cfg.model.input_rows = 64;
  cfg.model.input_cols = 64;
  if (const auto it = j.find("model"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'model': expected object");
    warn_unknown(*it, "model.",
                 {"architecture", "n_classes", "conv_channels", "dense_units", "residual",
                  "residual_channels", "ae_widths", "input_rows", "input_cols"},
                 cfg.warnings);
    std::string arch = architecture_name(cfg.model.architecture);
    read_field(*it, "model.", "architecture", arch, "string");
    try {
      cfg.model.architecture = parse_architecture(arch);
    } catch (const Error&) {
      throw ConfigError("config field 'model.architecture': expected autoencoder|small_cnn");
    }
    read_field(*it, "model.", "n_classes", cfg.model.n_classes, "integer");
    read_field(*it, "model.", "conv_channels", cfg.model.conv_channels,
               "array of integers");
    read_field(*it, "model.", "dense_units", cfg.model.dense_units, "array of integers");
    read_field(*it, "model.", "residual", cfg.model.residual, "boolean");
    read_field(*it, "model.", "residual_channels", cfg.model.residual_channels, "integer");
    read_field(*it, "model.", "ae_widths", cfg.model.ae_widths, "array of integers");
    read_field(*it, "model.", "input_rows", cfg.model.input_rows, "integer");
    read_field(*it, "model.", "input_cols", cfg.model.input_cols, "integer");
  }
  cfg.model.representation = cfg.representation;

  if (const auto it = j.find("train"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'train': expected object");
    warn_unknown(*it, "train.", {"learning_rate", "batch_size", "max_epochs", "patience"},
                 cfg.warnings);
    read_field(*it, "train.", "learning_rate", cfg.train.learning_rate, "number");
    read_field(*it, "train.", "batch_size", cfg.train.batch_size, "integer");
    read_field(*it, "train.", "max_epochs", cfg.train.max_epochs, "integer");
    read_field(*it, "train.", "patience", cfg.train.patience, "integer");
  }

  apply_seed(cfg, seed);
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& cfg) {
  return json{
      {"seed", cfg.seed},
      {"representation", representation_name(cfg.representation)},
      {"jobs", cfg.jobs},
      {"segment_seconds", cfg.segment_seconds},
      {"image_size", cfg.image_size},
      {"features",
       {{"frame_len", cfg.frame_len},
        {"hop", cfg.hop},
        {"n_fft", cfg.n_fft},
        {"n_mels_spectrogram", cfg.n_mels_spectrogram},
        {"n_mels_mfcc", cfg.n_mels_mfcc},
        {"n_coeffs", cfg.n_coeffs},
        {"f_min_hz", cfg.f_min_hz},
        {"f_max_hz", cfg.f_max_hz}}},
      {"augment",
       {{"snr_db_low", cfg.augment.snr_db_low},
        {"snr_db_high", cfg.augment.snr_db_high},
        {"max_shift_seconds", cfg.augment.max_shift_seconds},
        {"bit_depth", cfg.augment.bit_depth}}},
      {"split", {{"test_fraction", cfg.test_fraction}}},
      {"model", model_config_to_json(cfg.model)},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"max_epochs", cfg.train.max_epochs},
        {"patience", cfg.train.patience}}},
  };
}

std::string config_fingerprint(const RunConfig& cfg) {
  char out[24];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(run_config_to_json(cfg).dump())));
  return out;
}

FeatureConfig feature_config_for(const RunConfig& cfg, Representation repr) {
  FeatureConfig fc;
  fc.frame_len = cfg.frame_len;
  fc.hop = cfg.hop;
  fc.n_fft = cfg.n_fft;
  fc.n_mels = repr == Representation::Mfcc ? cfg.n_mels_mfcc : cfg.n_mels_spectrogram;
  fc.n_coeffs = cfg.n_coeffs;
  fc.f_min_hz = cfg.f_min_hz;
  fc.f_max_hz = cfg.f_max_hz;
  return fc;
}

std::string run_feature_fingerprint(const RunConfig& cfg, Representation repr) {
  switch (repr) {
    case Representation::Spectrogram:
      return feature_fingerprint(feature_config_for(cfg, repr),
                                 "spectrogram-img" + std::to_string(cfg.image_size));
    case Representation::Mfcc:
      return feature_fingerprint(feature_config_for(cfg, repr), "mfcc");
    case Representation::Embedding: return embedding_fingerprint();
  }
  throw ArgumentError("run_feature_fingerprint: bad representation");
}

}  // namespace asc
