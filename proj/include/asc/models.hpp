#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asc/nn.hpp"

namespace asc {

enum class Architecture { Autoencoder, SmallCnn };
enum class Representation { Spectrogram, Mfcc, Embedding };

std::string architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);
std::string representation_name(Representation r);
Representation parse_representation(const std::string& name);

struct ModelConfig {
  Architecture architecture = Architecture::SmallCnn;
  Representation representation = Representation::Spectrogram;
  int n_classes = 2;  // 2 (scene) or 6 (subclass)

  // Small CNN: conv3x3 -> relu -> pool per stage, then dense head.
  std::vector<size_t> conv_channels = {16, 32, 64};
  std::vector<size_t> dense_units = {128};
  bool residual = false;
  // Width of the optional residual block; 0 means conv_channels.back().
  // The skip connection requires it to match the incoming channel count.
  size_t residual_channels = 0;

  // Autoencoder: widths[0] is the input dimension, the rest are encoder
  // layer widths; the decoder mirrors them back.
  std::vector<size_t> ae_widths = {4096, 2048, 1024, 512};

  // Features are resampled to this grid before entering the model.
  size_t input_rows = 32;
  size_t input_cols = 32;

  uint64_t seed = 0;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 32;
  int max_epochs = 50;
  uint64_t seed = 0;
  int patience = 5;  // early stop after this many epochs without improvement

  void validate() const;
};

// Optional schedule for encoder-initialized classifiers: the first
// frozen_params parameters stay fixed for the first freeze_epochs epochs.
struct FreezePlan {
  int freeze_epochs = 0;
  size_t frozen_params = 0;
};

// Labeled feature tensors sharing one pipeline fingerprint.
struct FeatureSet {
  std::vector<Tensor> features;
  std::vector<int> labels;
  std::string fingerprint;

  size_t size() const { return features.size(); }
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
};

struct TrainedModel {
  ModelConfig config;
  Model model;
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based epoch the returned parameters come from
  Tensor feature_mean;  // train-split statistics, applied before the model
  Tensor feature_std;
  std::string feature_fingerprint;
};

// The configured architecture: the small CNN classifier, or the full
// reconstruction autoencoder (encoder + mirrored decoder) over ae_widths.
Model build_model(const ModelConfig& cfg);

// Reconstruction autoencoder regardless of cfg.architecture.
Model build_autoencoder(const ModelConfig& cfg);

// Encoder stack + dense(n_classes) + softmax. When `pretrained` is given its
// encoder parameters seed the classifier's feature stage.
Model build_encoder_classifier(const ModelConfig& cfg, const Model* pretrained = nullptr);

// Mini-batch SGD with seeded shuffling, per-epoch train/eval metrics, and
// early stopping on eval accuracy; returns the best-eval checkpoint.
TrainedModel train(Model model, const ModelConfig& cfg, const FeatureSet& train_set,
                   const FeatureSet& eval_set, const TrainConfig& tc,
                   const FreezePlan& freeze = {});

struct PretrainResult {
  Model autoencoder;
  std::vector<double> loss_history;  // reconstruction loss per epoch
  Tensor feature_mean;
  Tensor feature_std;
};

// Reconstruction pretraining (MSE) on unlabeled features.
PretrainResult pretrain_encoder(Model autoencoder, const std::vector<Tensor>& features,
                                const TrainConfig& tc);

// Number of parameters in the encoder stage of an autoencoder built from cfg
// (the prefix shared with build_encoder_classifier).
size_t encoder_param_count(const ModelConfig& cfg);

// Softmax distribution for one feature; standardization is applied inside.
Tensor predict(const TrainedModel& tm, const Tensor& feature);

// UTF-8 JSON header line (config, shapes, history), then all parameters as
// row-major 64-bit little-endian IEEE-754, then the standardization tensors.
std::vector<uint8_t> save_model(const TrainedModel& tm);
TrainedModel load_model(const std::vector<uint8_t>& bytes,
                        const std::string& expected_fingerprint = "");

void write_model_file(const std::filesystem::path& path, const TrainedModel& tm);
TrainedModel read_model_file(const std::filesystem::path& path,
                             const std::string& expected_fingerprint = "");

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace asc
