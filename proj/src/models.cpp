#include "asc/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace asc {

using nlohmann::json;

std::string architecture_name(Architecture a) {
  return a == Architecture::Autoencoder ? "autoencoder" : "small_cnn";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "autoencoder") return Architecture::Autoencoder;
  if (name == "small_cnn") return Architecture::SmallCnn;
  throw UnsupportedFormatError("unsupported architecture '" + name + "'");
}

std::string representation_name(Representation r) {
  switch (r) {
    case Representation::Spectrogram: return "spectrogram";
    case Representation::Mfcc: return "mfcc";
    case Representation::Embedding: return "embedding";
  }
  throw ArgumentError("representation_name: bad enum");
}

Representation parse_representation(const std::string& name) {
  if (name == "spectrogram") return Representation::Spectrogram;
  if (name == "mfcc") return Representation::Mfcc;
  if (name == "embedding") return Representation::Embedding;
  throw ArgumentError("unknown representation '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw ConfigError("train.learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 0) throw ConfigError("train.max_epochs must be >= 0");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
}

namespace {

void validate_n_classes(const ModelConfig& cfg) {
  if (cfg.n_classes != 2 && cfg.n_classes != 6)
    throw ConfigError("model.n_classes must be 2 (scene) or 6 (subclass)");
}

void validate_ae_widths(const ModelConfig& cfg) {
  if (cfg.ae_widths.size() < 2)
    throw ConfigError("model.ae_widths needs an input width and at least one encoder width");
  for (size_t i = 1; i < cfg.ae_widths.size(); ++i)
    if (cfg.ae_widths[i] >= cfg.ae_widths[i - 1])
      throw ConfigError("model.ae_widths must be strictly decreasing along the encoder");
  if (cfg.ae_widths[0] != cfg.input_rows * cfg.input_cols)
    throw ConfigError("model.ae_widths[0] (" + std::to_string(cfg.ae_widths[0]) +
                      ") must equal input_rows*input_cols (" +
                      std::to_string(cfg.input_rows * cfg.input_cols) + ")");
}

std::vector<LayerSpec> encoder_specs(const ModelConfig& cfg) {
  std::vector<LayerSpec> specs;
  for (size_t i = 1; i < cfg.ae_widths.size(); ++i) {
    specs.push_back(dense_spec(cfg.ae_widths[i]));
    specs.push_back(relu_spec());
  }
  return specs;
}

std::vector<LayerSpec> small_cnn_specs(const ModelConfig& cfg) {
  if (cfg.conv_channels.empty())
    throw ConfigError("model.conv_channels must not be empty");
  std::vector<LayerSpec> specs;
  for (size_t ch : cfg.conv_channels) {
    specs.push_back(conv2d_spec(ch));
    specs.push_back(relu_spec());
    specs.push_back(maxpool2d_spec(2));
  }
  if (cfg.residual) {
    const size_t rc =
        cfg.residual_channels != 0 ? cfg.residual_channels : cfg.conv_channels.back();
    const int skip = static_cast<int>(specs.size());  // activation after the last pool
    specs.push_back(conv2d_spec(rc));
    specs.push_back(relu_spec());
    specs.push_back(conv2d_spec(rc));
    specs.push_back(residual_add_spec(skip));
    specs.push_back(relu_spec());
  }
  specs.push_back(flatten_spec());
  for (size_t u : cfg.dense_units) {
    specs.push_back(dense_spec(u));
    specs.push_back(relu_spec());
  }
  specs.push_back(dense_spec(static_cast<size_t>(cfg.n_classes)));
  specs.push_back(softmax_spec());
  return specs;
}

Tensor stack_batch(const std::vector<Tensor>& features, const std::vector<size_t>& order,
                   size_t begin, size_t end) {
  Shape shape{end - begin};
  shape.insert(shape.end(), features[order[begin]].shape.begin(),
               features[order[begin]].shape.end());
  Tensor batch(std::move(shape));
  const size_t item = features[order[begin]].size();
  for (size_t i = begin; i < end; ++i)
    std::copy(features[order[i]].v.begin(), features[order[i]].v.end(),
              batch.v.begin() + static_cast<std::ptrdiff_t>((i - begin) * item));
  return batch;
}

struct Standardizer {
  Tensor mean;
  Tensor std_dev;

  static Standardizer fit(const std::vector<Tensor>& features) {
    if (features.empty()) throw ArgumentError("standardizer: empty feature set");
    Standardizer s;
    s.mean = Tensor(features[0].shape);
    s.std_dev = Tensor(features[0].shape);
    const double n = static_cast<double>(features.size());
    for (const Tensor& f : features)
      for (size_t i = 0; i < f.size(); ++i) s.mean.v[i] += f.v[i];
    for (double& m : s.mean.v) m /= n;
    for (const Tensor& f : features)
      for (size_t i = 0; i < f.size(); ++i) {
        const double d = f.v[i] - s.mean.v[i];
        s.std_dev.v[i] += d * d;
      }
    for (double& v : s.std_dev.v) v = std::max(std::sqrt(v / n), 1e-8);
    return s;
  }

  Tensor apply(const Tensor& f) const {
    Tensor out(f.shape);
    for (size_t i = 0; i < f.size(); ++i)
      out.v[i] = (f.v[i] - mean.v[i]) / std_dev.v[i];
    return out;
  }

  std::vector<Tensor> apply_all(const std::vector<Tensor>& features) const {
    std::vector<Tensor> out;
    out.reserve(features.size());
    for (const Tensor& f : features) out.push_back(apply(f));
    return out;
  }
};

// Fixed-order full pass: mean loss and accuracy.
std::pair<double, double> classifier_metrics(Model& model, const std::vector<Tensor>& x,
                                             const std::vector<int>& y, int batch_size) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  double loss_sum = 0.0;
  size_t correct = 0;
  for (size_t begin = 0; begin < x.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(begin + static_cast<size_t>(batch_size), x.size());
    const Tensor batch = stack_batch(x, order, begin, end);
    auto acts = forward(model, batch);
    const std::vector<int> labels(y.begin() + static_cast<std::ptrdiff_t>(begin),
                                  y.begin() + static_cast<std::ptrdiff_t>(end));
    loss_sum += cross_entropy(acts.back(), labels) * static_cast<double>(end - begin);
    const std::vector<int> pred = argmax_rows(acts.back());
    for (size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == labels[i]) ++correct;
  }
  return {loss_sum / static_cast<double>(x.size()),
          static_cast<double>(correct) / static_cast<double>(x.size())};
}

void freeze_grads(Model& model, size_t frozen_params) {
  size_t remaining = frozen_params;
  for (Param* p : model.params()) {
    if (remaining == 0) return;
    const size_t n = std::min(remaining, p->grad.size());
    std::fill_n(p->grad.v.begin(), n, 0.0);
    remaining -= n;
  }
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
  validate_n_classes(cfg);
  if (cfg.architecture == Architecture::Autoencoder) return build_autoencoder(cfg);
  return build_layers({1, cfg.input_rows, cfg.input_cols}, small_cnn_specs(cfg), cfg.seed);
}

Model build_autoencoder(const ModelConfig& cfg) {
  validate_ae_widths(cfg);
  std::vector<LayerSpec> specs = encoder_specs(cfg);
  for (size_t i = cfg.ae_widths.size() - 1; i-- > 1;) {
    specs.push_back(dense_spec(cfg.ae_widths[i]));
    specs.push_back(relu_spec());
  }
  specs.push_back(dense_spec(cfg.ae_widths[0]));  // linear reconstruction
  return build_layers({cfg.ae_widths[0]}, std::move(specs), cfg.seed);
}

Model build_encoder_classifier(const ModelConfig& cfg, const Model* pretrained) {
  validate_n_classes(cfg);
  validate_ae_widths(cfg);
  std::vector<LayerSpec> specs = encoder_specs(cfg);
  specs.push_back(dense_spec(static_cast<size_t>(cfg.n_classes)));
  specs.push_back(softmax_spec());
  Model clf = build_layers({cfg.ae_widths[0]}, std::move(specs), cfg.seed);

  if (pretrained != nullptr) {
    const auto src = pretrained->params();
    const auto dst = clf.params();
    const size_t encoder_tensors = 2 * (cfg.ae_widths.size() - 1);  // w and b per dense
    if (src.size() < encoder_tensors || dst.size() < encoder_tensors)
      throw ConfigError("encoder classifier: pretrained model does not cover the encoder");
    for (size_t i = 0; i < encoder_tensors; ++i) {
      if (src[i]->value.shape != dst[i]->value.shape)
        throw ConfigError("encoder classifier: pretrained encoder shape " +
                          shape_str(src[i]->value.shape) + " does not match " +
                          shape_str(dst[i]->value.shape));
      dst[i]->value = src[i]->value;
    }
  }
  return clf;
}

size_t encoder_param_count(const ModelConfig& cfg) {
  validate_ae_widths(cfg);
  size_t n = 0;
  for (size_t i = 1; i < cfg.ae_widths.size(); ++i)
    n += cfg.ae_widths[i - 1] * cfg.ae_widths[i] + cfg.ae_widths[i];
  return n;
}

TrainedModel train(Model model, const ModelConfig& cfg, const FeatureSet& train_set,
                   const FeatureSet& eval_set, const TrainConfig& tc,
                   const FreezePlan& freeze) {
  tc.validate();
  if (train_set.size() == 0) throw ArgumentError("train: empty training set");
  if (eval_set.size() == 0) throw ArgumentError("train: empty eval set");
  if (train_set.labels.size() != train_set.size() ||
      eval_set.labels.size() != eval_set.size())
    throw ArgumentError("train: label count does not match the feature count");
  if (train_set.fingerprint != eval_set.fingerprint)
    throw ConfigError("train: train and eval sets carry different pipeline fingerprints ('" +
                      train_set.fingerprint + "' vs '" + eval_set.fingerprint + "')");
  const size_t n_classes = model.act_shapes.back()[0];
  for (int label : train_set.labels)
    if (label < 0 || static_cast<size_t>(label) >= n_classes)
      throw ArgumentError("train: label " + std::to_string(label) + " out of range");
  for (int label : eval_set.labels)
    if (label < 0 || static_cast<size_t>(label) >= n_classes)
      throw ArgumentError("train: label " + std::to_string(label) + " out of range");

  const Standardizer stats = Standardizer::fit(train_set.features);
  const std::vector<Tensor> train_x = stats.apply_all(train_set.features);
  const std::vector<Tensor> eval_x = stats.apply_all(eval_set.features);

  TrainedModel tm;
  tm.config = cfg;
  tm.feature_mean = stats.mean;
  tm.feature_std = stats.std_dev;
  tm.feature_fingerprint = train_set.fingerprint;

  Rng rng(tc.seed);
  std::vector<size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);

  double best_acc = -1.0;
  std::vector<double> best_snapshot = snapshot_params(model);
  int best_epoch = 0;
  int since_improvement = 0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t begin = 0; begin < train_x.size();
         begin += static_cast<size_t>(tc.batch_size)) {
      const size_t end =
          std::min(begin + static_cast<size_t>(tc.batch_size), train_x.size());
      const Tensor batch = stack_batch(train_x, order, begin, end);
      std::vector<int> labels(end - begin);
      for (size_t i = begin; i < end; ++i) labels[i - begin] = train_set.labels[order[i]];

      auto acts = forward(model, batch);
      const double batch_loss = cross_entropy(acts.back(), labels);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch));
      backward(model, acts, labels);
      if (epoch <= freeze.freeze_epochs) freeze_grads(model, freeze.frozen_params);
      sgd_step(model, tc.learning_rate);
    }

    EpochStats stats_row;
    stats_row.epoch = epoch;
    std::tie(stats_row.train_loss, stats_row.train_accuracy) =
        classifier_metrics(model, train_x, train_set.labels, tc.batch_size);
    std::tie(stats_row.eval_loss, stats_row.eval_accuracy) =
        classifier_metrics(model, eval_x, eval_set.labels, tc.batch_size);
    tm.history.push_back(stats_row);

    if (stats_row.eval_accuracy > best_acc) {
      best_acc = stats_row.eval_accuracy;
      best_snapshot = snapshot_params(model);
      best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= tc.patience) {
      break;
    }
  }

  restore_params(model, best_snapshot);
  tm.best_epoch = best_epoch;
  tm.model = std::move(model);
  return tm;
}

PretrainResult pretrain_encoder(Model autoencoder, const std::vector<Tensor>& features,
                                const TrainConfig& tc) {
  tc.validate();
  if (features.empty()) throw ArgumentError("pretrain_encoder: empty feature set");
  if (autoencoder.act_shapes.back() != autoencoder.input_shape)
    throw ArgumentError("pretrain_encoder: model output shape does not match its input");

  const Standardizer stats = Standardizer::fit(features);
  const std::vector<Tensor> x = stats.apply_all(features);

  PretrainResult result;
  result.feature_mean = stats.mean;
  result.feature_std = stats.std_dev;

  Rng rng(tc.seed);
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);

  // Fixed-order reconstruction loss over the whole set.
  auto full_loss = [&]() {
    std::vector<size_t> fixed(x.size());
    std::iota(fixed.begin(), fixed.end(), 0);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < x.size(); begin += static_cast<size_t>(tc.batch_size)) {
      const size_t end = std::min(begin + static_cast<size_t>(tc.batch_size), x.size());
      const Tensor batch = stack_batch(x, fixed, begin, end);
      auto acts = forward(autoencoder, batch);
      loss_sum += mse_loss(acts.back(), batch) * static_cast<double>(end - begin);
    }
    return loss_sum / static_cast<double>(x.size());
  };

  result.loss_history.push_back(full_loss());  // loss at initialization
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t begin = 0; begin < x.size(); begin += static_cast<size_t>(tc.batch_size)) {
      const size_t end = std::min(begin + static_cast<size_t>(tc.batch_size), x.size());
      const Tensor batch = stack_batch(x, order, begin, end);
      auto acts = forward(autoencoder, batch);
      const double loss = mse_loss(acts.back(), batch);
      if (!std::isfinite(loss))
        throw DivergenceError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      backward_mse(autoencoder, acts, batch);
      sgd_step(autoencoder, tc.learning_rate);
    }
    result.loss_history.push_back(full_loss());
  }

  result.autoencoder = std::move(autoencoder);
  return result;
}

Tensor predict(const TrainedModel& tm, const Tensor& feature) {
  Model& model = const_cast<Model&>(tm.model);  // forward caches activations
  if (feature.shape != model.input_shape)
    throw ShapeError("predict: feature shape " + shape_str(feature.shape) +
                     " does not match model input " + shape_str(model.input_shape));

  Tensor standardized(feature.shape);
  for (size_t i = 0; i < feature.size(); ++i)
    standardized.v[i] = (feature.v[i] - tm.feature_mean.v[i]) / tm.feature_std.v[i];

  Shape batch_shape{1};
  batch_shape.insert(batch_shape.end(), feature.shape.begin(), feature.shape.end());
  Tensor batch(batch_shape, std::move(standardized.v));
  auto acts = forward(model, batch);

  const Tensor& out = acts.back();
  Tensor row(Shape{out.size()});
  row.v = out.v;
  return row;
}

std::vector<uint8_t> save_model(const TrainedModel& tm) {
  json header;
  header["format"] = "asc-model-v1";
  header["architecture"] = architecture_name(tm.config.architecture);
  header["config"] = model_config_to_json(tm.config);
  header["input_shape"] = tm.model.input_shape;
  json layers = json::array();
  for (const auto& spec : tm.model.specs) layers.push_back(spec.to_json());
  header["layers"] = layers;
  header["best_epoch"] = tm.best_epoch;
  header["feature_fingerprint"] = tm.feature_fingerprint;
  json history = json::array();
  for (const auto& h : tm.history)
    history.push_back({{"epoch", h.epoch},
                       {"train_loss", h.train_loss},
                       {"train_accuracy", h.train_accuracy},
                       {"eval_loss", h.eval_loss},
                       {"eval_accuracy", h.eval_accuracy}});
  header["history"] = history;

  const std::string line = header.dump() + "\n";
  std::vector<uint8_t> out(line.begin(), line.end());

  auto append_tensor = [&out](const Tensor& t) {
    const size_t base = out.size();
    out.resize(base + t.size() * sizeof(double));
    std::memcpy(out.data() + base, t.v.data(), t.size() * sizeof(double));
  };
  for (Param* p : tm.model.params()) append_tensor(p->value);
  append_tensor(tm.feature_mean);
  append_tensor(tm.feature_std);
  return out;
}

TrainedModel load_model(const std::vector<uint8_t>& bytes,
                        const std::string& expected_fingerprint) {
  const auto nl = std::find(bytes.begin(), bytes.end(), static_cast<uint8_t>('\n'));
  if (nl == bytes.end()) throw FormatError("model file: missing header line");
  json header;
  try {
    header = json::parse(std::string(bytes.begin(), nl));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model file: bad header: ") + e.what());
  }

  TrainedModel tm;
  try {
    if (header.at("format").get<std::string>() != "asc-model-v1")
      throw UnsupportedFormatError("model file: unknown format tag");
    parse_architecture(header.at("architecture").get<std::string>());
    tm.config = model_config_from_json(header.at("config"));
    tm.best_epoch = header.at("best_epoch").get<int>();
    tm.feature_fingerprint = header.at("feature_fingerprint").get<std::string>();
    for (const auto& h : header.at("history")) {
      EpochStats e;
      e.epoch = h.at("epoch").get<int>();
      e.train_loss = h.at("train_loss").get<double>();
      e.train_accuracy = h.at("train_accuracy").get<double>();
      e.eval_loss = h.at("eval_loss").get<double>();
      e.eval_accuracy = h.at("eval_accuracy").get<double>();
      tm.history.push_back(e);
    }

    const Shape input_shape = header.at("input_shape").get<Shape>();
    std::vector<LayerSpec> specs;
    for (const auto& layer : header.at("layers"))
      specs.push_back(LayerSpec::from_json(layer));
    tm.model = build_layers(input_shape, std::move(specs), 0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file: bad header: ") + e.what());
  }

  if (!expected_fingerprint.empty() && expected_fingerprint != tm.feature_fingerprint)
    throw ConfigError("model file: trained with feature pipeline '" +
                      tm.feature_fingerprint + "', requested '" + expected_fingerprint +
                      "'");

  const size_t input_size = shape_size(tm.model.input_shape);
  const size_t expected_doubles = count_params(tm.model) + 2 * input_size;
  const size_t expected_bytes = expected_doubles * sizeof(double);
  const size_t available = static_cast<size_t>(bytes.end() - nl) - 1;
  if (available != expected_bytes)
    throw FormatError("model file: expected " + std::to_string(expected_bytes) +
                      " parameter bytes, found " + std::to_string(available));

  const uint8_t* p = &*(nl + 1);
  auto read_tensor = [&p](Tensor& t) {
    std::memcpy(t.v.data(), p, t.size() * sizeof(double));
    p += t.size() * sizeof(double);
  };
  for (Param* param : tm.model.params()) read_tensor(param->value);
  tm.feature_mean = Tensor(tm.model.input_shape);
  tm.feature_std = Tensor(tm.model.input_shape);
  read_tensor(tm.feature_mean);
  read_tensor(tm.feature_std);
  return tm;
}

void write_model_file(const std::filesystem::path& path, const TrainedModel& tm) {
  const std::vector<uint8_t> bytes = save_model(tm);
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

TrainedModel read_model_file(const std::filesystem::path& path,
                             const std::string& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return load_model(bytes, expected_fingerprint);
}

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"architecture", architecture_name(cfg.architecture)},
              {"representation", representation_name(cfg.representation)},
              {"n_classes", cfg.n_classes},
              {"conv_channels", cfg.conv_channels},
              {"dense_units", cfg.dense_units},
              {"residual", cfg.residual},
              {"residual_channels", cfg.residual_channels},
              {"ae_widths", cfg.ae_widths},
              {"input_rows", cfg.input_rows},
              {"input_cols", cfg.input_cols},
              {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.architecture = parse_architecture(j.at("architecture").get<std::string>());
  cfg.representation = parse_representation(j.at("representation").get<std::string>());
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.conv_channels = j.at("conv_channels").get<std::vector<size_t>>();
  cfg.dense_units = j.at("dense_units").get<std::vector<size_t>>();
  cfg.residual = j.at("residual").get<bool>();
  cfg.residual_channels = j.at("residual_channels").get<size_t>();
  cfg.ae_widths = j.at("ae_widths").get<std::vector<size_t>>();
  cfg.input_rows = j.at("input_rows").get<size_t>();
  cfg.input_cols = j.at("input_cols").get<size_t>();
  cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

}  // namespace asc
