#include "asc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "asc/augment.hpp"
#include "asc/config.hpp"
#include "asc/dataset.hpp"
#include "asc/embeddings.hpp"
#include "asc/eval.hpp"
#include "asc/fmat.hpp"
#include "asc/image.hpp"
#include "asc/models.hpp"
#include "asc/parallel.hpp"

namespace asc::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> repr;
  std::optional<double> test_fraction;
  std::string input;
  std::string out;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
  for (const std::string& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  // Flags win over file values.
  if (opts.seed) apply_seed(cfg, *opts.seed);
  if (opts.jobs) cfg.jobs = *opts.jobs;
  if (opts.repr) {
    cfg.representation = parse_representation(*opts.repr);
    cfg.model.representation = cfg.representation;
  }
  if (opts.test_fraction) {
    if (!(*opts.test_fraction > 0.0 && *opts.test_fraction < 1.0))
      throw ConfigError("--test-fraction must lie in (0, 1)");
    cfg.test_fraction = *opts.test_fraction;
  }
  return cfg;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Manifest paths are relative to the manifest file's directory.
struct LoadedManifest {
  DatasetManifest manifest;
  fs::path dir;
};

LoadedManifest load_manifest_arg(const std::string& input) {
  const fs::path p(input);
  if (!fs::exists(p)) throw IoError("input does not exist: " + p.string());
  if (fs::is_directory(p)) {
    LoadedManifest lm;
    lm.manifest = build_manifest(p);
    lm.dir = p;
    return lm;
  }
  return {read_manifest(p), p.parent_path()};
}

void write_text_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

int label_of(const ManifestEntry& e, int n_classes) {
  if (n_classes == 2) return e.scene() == Scene::Indoor ? 0 : 1;
  return static_cast<int>(e.subclass);
}

std::vector<std::string> class_names(int n_classes) {
  if (n_classes == 2) return {scene_label(Scene::Indoor), scene_label(Scene::Outdoor)};
  std::vector<std::string> names;
  for (Subclass s : kAllSubclasses) names.push_back(subclass_label(s));
  return names;
}

Tensor feature_tensor_from_fmat(const Fmat& fm, const ModelConfig& mc) {
  Mat src(fm.rows, fm.cols);
  for (size_t i = 0; i < fm.values.size(); ++i) src.v[i] = fm.values[i];
  const Mat resized = bilinear_resize(src, mc.input_rows, mc.input_cols);
  if (mc.architecture == Architecture::Autoencoder)
    return Tensor({mc.input_rows * mc.input_cols}, std::move(const_cast<Mat&>(resized).v));
  Tensor t({1, mc.input_rows, mc.input_cols});
  t.v = resized.v;
  return t;
}

FeatureSet load_feature_set(const DatasetManifest& manifest, const fs::path& features_dir,
                            SplitAssignment split, const ModelConfig& mc) {
  FeatureSet set;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    const fs::path path = features_dir / (e.id() + ".fmat");
    if (!fs::exists(path)) throw IoError("missing feature file " + path.string());
    const Fmat fm = read_fmat(path);
    if (set.fingerprint.empty())
      set.fingerprint = fm.fingerprint;
    else if (set.fingerprint != fm.fingerprint)
      throw ConfigError("feature file " + path.string() + " carries fingerprint '" +
                        fm.fingerprint + "', expected '" + set.fingerprint + "'");
    set.features.push_back(feature_tensor_from_fmat(fm, mc));
    set.labels.push_back(label_of(e, mc.n_classes));
  }
  return set;
}

// ---- subcommand implementations ------------------------------------------

int cmd_segment(const CommonOpts& opts, double seconds_flag) {
  RunConfig cfg = resolve_config(opts);
  const double seconds = seconds_flag > 0.0 ? seconds_flag : cfg.segment_seconds;
  const LoadedManifest in = load_manifest_arg(opts.input);
  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir);

  std::vector<std::vector<ManifestEntry>> produced(in.manifest.size());
  std::vector<size_t> remainders(in.manifest.size(), 0);
  parallel_for(in.manifest.size(), cfg.jobs, [&](size_t i) {
    const ManifestEntry& e = in.manifest.entries[i];
    const fs::path src = in.dir / e.path;
    const WavInfo info = wav_file_info(src);
    const AudioClip clip = read_wav_file(src);
    const SplitResult split = split_clip(clip, seconds);
    remainders[i] = split.remainder_samples;

    const fs::path subdir = out_dir / subclass_name(e.subclass);
    fs::create_directories(subdir);
    for (size_t s = 0; s < split.segments.size(); ++s) {
      const std::string name = e.id() + "_s" + std::to_string(s) + ".wav";
      PcmFormat fmt{info.bit_depth, clip.channels(), clip.sample_rate_hz};
      write_wav_file(subdir / name, split.segments[s], fmt);
      ManifestEntry seg;
      seg.path = (fs::path(subclass_name(e.subclass)) / name).generic_string();
      seg.subclass = e.subclass;
      seg.parent_id = e.parent_id;
      produced[i].push_back(std::move(seg));
    }
  });

  DatasetManifest out;
  size_t dropped = 0;
  for (size_t i = 0; i < produced.size(); ++i) {
    dropped += remainders[i];
    for (auto& seg : produced[i]) out.entries.push_back(std::move(seg));
  }
  write_manifest(out_dir / "manifest.jsonl", out);
  std::cerr << "segment: " << in.manifest.size() << " recordings -> " << out.size()
            << " clips of " << seconds << " s";
  if (dropped > 0) std::cerr << " (" << dropped << " trailing samples dropped)";
  std::cerr << "\n";
  return 0;
}

int cmd_augment(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  const LoadedManifest in = load_manifest_arg(opts.input);
  const fs::path out_dir(opts.out);
  const DatasetManifest out =
      augment_manifest(in.manifest, in.dir, cfg.augment, out_dir, cfg.jobs);
  write_manifest(out_dir / "manifest.jsonl", out);
  std::cerr << "augment: " << in.manifest.size() << " clips -> " << out.size()
            << " entries\n";
  return 0;
}

int cmd_split(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  const LoadedManifest in = load_manifest_arg(opts.input);
  const DatasetManifest out =
      split_train_test(in.manifest, cfg.test_fraction, cfg.seed ^ fnv1a64("split"));
  const fs::path out_path =
      opts.out.empty() ? in.dir / "manifest.jsonl" : fs::path(opts.out);
  write_manifest(out_path, out);

  size_t n_test = 0;
  for (const auto& e : out.entries)
    if (e.split == SplitAssignment::Test) ++n_test;
  std::cerr << "split: " << out.size() - n_test << " train / " << n_test << " test\n";
  return 0;
}

int cmd_extract(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  require(cfg.representation != Representation::Embedding,
          "extract: embeddings are ingested from files; use embed-ingest");
  const LoadedManifest in = load_manifest_arg(opts.input);
  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir);

  const FeatureConfig fc = feature_config_for(cfg, cfg.representation);
  const std::string fingerprint = run_feature_fingerprint(cfg, cfg.representation);

  parallel_for(in.manifest.size(), cfg.jobs, [&](size_t i) {
    const ManifestEntry& e = in.manifest.entries[i];
    const AudioClip mono = downmix_to_mono(read_wav_file(in.dir / e.path));
    if (cfg.representation == Representation::Spectrogram) {
      const LogMelSpectrogram lms = log_mel_spectrogram(mono, fc);
      const GrayImage img = render_spectrogram_image(lms, cfg.image_size);
      write_png_gray8(out_dir / (e.id() + ".png"), img);
      std::vector<double> pixels(img.pixels.begin(), img.pixels.end());
      write_fmat(out_dir / (e.id() + ".fmat"),
                 fmat_from_doubles(static_cast<size_t>(img.height),
                                   static_cast<size_t>(img.width), pixels, fingerprint));
    } else {
      const MfccMatrix m = mfcc(mono, fc);
      write_fmat(out_dir / (e.id() + ".fmat"),
                 fmat_from_doubles(m.n_frames, m.n_coeffs, m.values, fingerprint));
    }
  });
  std::cerr << "extract: " << in.manifest.size() << " "
            << representation_name(cfg.representation) << " feature files\n";
  return 0;
}

int cmd_embed_ingest(const CommonOpts& opts, const std::string& embeddings_dir) {
  RunConfig cfg = resolve_config(opts);
  const LoadedManifest in = load_manifest_arg(opts.input);
  const fs::path emb_dir(embeddings_dir);
  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir);
  const std::string fingerprint = embedding_fingerprint();

  parallel_for(in.manifest.size(), cfg.jobs, [&](size_t i) {
    const ManifestEntry& e = in.manifest.entries[i];
    const fs::path csv_path = emb_dir / (e.id() + ".csv");
    if (!fs::exists(csv_path)) throw IoError("missing embedding csv " + csv_path.string());
    std::ifstream csv(csv_path);
    std::stringstream buf;
    buf << csv.rdbuf();
    EmbeddingMatrix emb = parse_embedding_csv(buf.str());
    emb.clip_id = e.id();

    const WavInfo info = wav_file_info(in.dir / e.path);
    if (info.samples_per_channel % static_cast<size_t>(info.sample_rate_hz) != 0)
      throw FormatError("embed-ingest: clip " + e.path +
                        " is not a whole number of seconds");
    const size_t seconds = info.samples_per_channel / static_cast<size_t>(info.sample_rate_hz);
    if (seconds != emb.n_seconds)
      throw FormatError("embed-ingest: " + csv_path.string() + " has " +
                        std::to_string(emb.n_seconds) + " rows for a " +
                        std::to_string(seconds) + " s clip");

    write_fmat(out_dir / (e.id() + ".fmat"),
               fmat_from_doubles(emb.n_seconds, EmbeddingMatrix::kColumns, emb.values,
                                 fingerprint));
  });
  std::cerr << "embed-ingest: " << in.manifest.size() << " embedding files\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& features_dir,
              const std::string& arch_flag, const std::string& log_path) {
  RunConfig cfg = resolve_config(opts);
  if (!arch_flag.empty()) cfg.model.architecture = parse_architecture(arch_flag);
  const LoadedManifest in = load_manifest_arg(opts.input);

  // The classifier path for the autoencoder architecture is the pretrained
  // encoder with a softmax head; build_model covers the small CNN.
  ModelConfig mc = cfg.model;
  const FeatureSet train_set =
      load_feature_set(in.manifest, features_dir, SplitAssignment::Train, mc);
  const FeatureSet test_set =
      load_feature_set(in.manifest, features_dir, SplitAssignment::Test, mc);
  require(train_set.size() > 0, "train: manifest has no train-split entries");
  require(test_set.size() > 0, "train: manifest has no test-split entries");

  TrainedModel tm;
  if (mc.architecture == Architecture::Autoencoder) {
    std::cerr << "train: pretraining encoder on " << train_set.size() << " features\n";
    PretrainResult pre = pretrain_encoder(build_autoencoder(mc), train_set.features, cfg.train);
    Model clf = build_encoder_classifier(mc, &pre.autoencoder);
    const FreezePlan freeze{5, encoder_param_count(mc)};
    tm = train(std::move(clf), mc, train_set, test_set, cfg.train, freeze);
  } else {
    tm = train(build_model(mc), mc, train_set, test_set, cfg.train);
  }

  write_model_file(opts.out, tm);

  std::string metrics;
  for (const EpochStats& h : tm.history) {
    metrics += json{{"epoch", h.epoch},
                    {"train_loss", h.train_loss},
                    {"train_accuracy", h.train_accuracy},
                    {"eval_loss", h.eval_loss},
                    {"eval_accuracy", h.eval_accuracy}}
                   .dump();
    metrics += '\n';
  }
  const fs::path log =
      log_path.empty() ? fs::path(opts.out + ".metrics.jsonl") : fs::path(log_path);
  write_text_file(log, metrics);

  std::cerr << "train: " << tm.history.size() << " epochs, best epoch " << tm.best_epoch;
  if (!tm.history.empty() && tm.best_epoch > 0)
    std::cerr << " (eval accuracy "
              << format_percent(tm.history[static_cast<size_t>(tm.best_epoch) - 1].eval_accuracy)
              << ")";
  std::cerr << ", " << count_params(tm.model) << " parameters\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& features_dir,
             const std::string& model_path) {
  RunConfig cfg = resolve_config(opts);
  const LoadedManifest in = load_manifest_arg(opts.input);

  TrainedModel tm = read_model_file(model_path);
  const FeatureSet test_set =
      load_feature_set(in.manifest, features_dir, SplitAssignment::Test, tm.config);
  require(test_set.size() > 0, "eval: manifest has no test-split entries");
  if (test_set.fingerprint != tm.feature_fingerprint)
    throw ConfigError("eval: model was trained with feature pipeline '" +
                      tm.feature_fingerprint + "', features carry '" +
                      test_set.fingerprint + "'");

  const EvalResult result = evaluate(tm, test_set, class_names(tm.config.n_classes));
  const OverfitReport overfit = overfit_gap(tm.history);

  double train_accuracy = 0.0;
  if (tm.best_epoch > 0)
    train_accuracy = tm.history[static_cast<size_t>(tm.best_epoch) - 1].train_accuracy;

  json confusion_counts = json::array();
  for (size_t r = 0; r < result.confusion.n_classes; ++r) {
    json row = json::array();
    for (size_t c = 0; c < result.confusion.n_classes; ++c)
      row.push_back(result.confusion.at(r, c));
    confusion_counts.push_back(row);
  }

  const json record = {
      {"architecture", architecture_name(tm.config.architecture)},
      {"representation", representation_name(tm.config.representation)},
      {"seed", cfg.seed},
      {"test_accuracy", result.accuracy},
      {"train_accuracy", train_accuracy},
      {"overfit", overfit.flagged},
      {"max_overfit_gap", overfit.max_gap},
      {"param_count", count_params(tm.model)},
      {"confusion", {{"classes", result.confusion.class_names}, {"counts", confusion_counts}}},
      {"feature_fingerprint", tm.feature_fingerprint},
      {"config_fingerprint", config_fingerprint(cfg)},
  };
  write_text_file(opts.out, record.dump(2) + "\n");
  std::cerr << "eval: test accuracy " << format_percent(result.accuracy) << " over "
            << test_set.size() << " items\n";
  return 0;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& results,
               const std::string& manifest_path) {
  RunConfig cfg = resolve_config(opts);
  (void)cfg;
  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir);

  std::vector<ResultRow> rows;
  for (const std::string& path : results) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results file " + path);
    json record;
    try {
      in >> record;
    } catch (const json::parse_error& e) {
      throw FormatError("results file " + path + ": " + e.what());
    }
    ResultRow row;
    row.architecture = record.at("architecture").get<std::string>();
    row.representation = record.at("representation").get<std::string>();
    row.test_accuracy = record.at("test_accuracy").get<double>();
    row.train_accuracy = record.at("train_accuracy").get<double>();
    row.overfit = record.at("overfit").get<bool>();
    row.param_count = record.at("param_count").get<size_t>();
    rows.push_back(std::move(row));
  }

  std::string md = render_results_markdown(rows);
  if (!manifest_path.empty()) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    const AccountingReport accounting = table1_accounting(manifest, 5.0);
    const BalanceReport balance = check_balance(manifest);
    md += "\n## Dataset\n\n";
    md += render_accounting(accounting);
    md += balance.balanced ? "\nSubclass counts are balanced.\n"
                           : "\nSubclass counts are NOT balanced.\n";
  }
  write_text_file(out_dir / "results.md", md);
  write_text_file(out_dir / "results.csv", render_results_csv(rows));
  std::cerr << "report: " << rows.size() << " result rows -> " << (out_dir / "results.md")
            << "\n";
  return 0;
}

int cmd_render(const CommonOpts& opts, bool waveform) {
  RunConfig cfg = resolve_config(opts);
  const fs::path out_dir(opts.out);
  fs::create_directories(out_dir);
  const FeatureConfig fc = feature_config_for(cfg, Representation::Spectrogram);

  std::vector<fs::path> files;
  const fs::path input(opts.input);
  fs::path base;
  if (fs::is_regular_file(input) && input.extension() == ".wav") {
    files.push_back(input.filename());
    base = input.parent_path();
  } else {
    const LoadedManifest in = load_manifest_arg(opts.input);
    base = in.dir;
    for (const auto& e : in.manifest.entries) files.emplace_back(e.path);
  }

  parallel_for(files.size(), cfg.jobs, [&](size_t i) {
    const AudioClip clip = read_wav_file(base / files[i]);
    const AudioClip mono = downmix_to_mono(clip);
    const std::string stem = files[i].stem().string();
    const LogMelSpectrogram lms = log_mel_spectrogram(mono, fc);
    write_png_gray8(out_dir / (stem + ".png"), render_spectrogram_image(lms, cfg.image_size));
    if (waveform)
      write_png_gray8(out_dir / (stem + "_wave.png"), render_waveform(clip));
  });
  std::cerr << "render: " << files.size() << " clips\n";
  return 0;
}

void add_common(CLI::App* sub, CommonOpts& opts, bool needs_out = true) {
  sub->add_option("--config", opts.config_path, "JSON run configuration");
  sub->add_option("--seed", opts.seed, "override the run seed");
  sub->add_option("--jobs", opts.jobs, "worker pool size");
  sub->add_option("--input,-i", opts.input, "input path")->required();
  auto* out = sub->add_option("--out,-o", opts.out, "output path");
  if (needs_out) out->required();
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"Acoustic scene classification benchmark pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  double segment_seconds = 0.0;
  std::string embeddings_dir;
  std::string features_dir;
  std::string model_path;
  std::string arch_flag;
  std::string log_path;
  std::string manifest_path;
  std::vector<std::string> results_files;
  bool waveform = false;

  auto* segment = app.add_subcommand("segment", "cut recordings into fixed-length clips");
  add_common(segment, opts);
  segment->add_option("--seconds", segment_seconds, "segment length in seconds");

  auto* augment = app.add_subcommand("augment", "double the dataset with noisy shifted variants");
  add_common(augment, opts);

  auto* split = app.add_subcommand("split", "assign group-aware train/test splits");
  add_common(split, opts, false);
  split->add_option("--test-fraction", opts.test_fraction, "test share of parent groups");

  auto* extract = app.add_subcommand("extract", "compute feature files from audio");
  add_common(extract, opts);
  extract->add_option("--repr", opts.repr, "spectrogram|mfcc|embedding");

  auto* embed = app.add_subcommand("embed-ingest", "validate and convert embedding CSVs");
  add_common(embed, opts);
  embed->add_option("--embeddings", embeddings_dir, "directory of <id>.csv files")->required();

  auto* train = app.add_subcommand("train", "train a classifier on extracted features");
  add_common(train, opts);
  train->add_option("--features", features_dir, "feature file directory")->required();
  train->add_option("--arch", arch_flag, "autoencoder|small_cnn");
  train->add_option("--repr", opts.repr, "spectrogram|mfcc|embedding");
  train->add_option("--log", log_path, "metrics JSONL path");

  auto* eval = app.add_subcommand("eval", "evaluate a trained model on the test split");
  add_common(eval, opts);
  eval->add_option("--features", features_dir, "feature file directory")->required();
  eval->add_option("--model", model_path, "trained model file")->required();

  auto* report = app.add_subcommand("report", "render result tables from eval records");
  report->add_option("--config", opts.config_path, "JSON run configuration");
  report->add_option("--input,-i", results_files, "eval result JSON files")->required();
  report->add_option("--out,-o", opts.out, "output directory")->required();
  report->add_option("--manifest", manifest_path, "manifest for dataset accounting");

  auto* render = app.add_subcommand("render", "write spectrogram (and waveform) PNGs");
  add_common(render, opts);
  render->add_flag("--waveform", waveform, "also render amplitude plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (segment->parsed()) return cmd_segment(opts, segment_seconds);
    if (augment->parsed()) return cmd_augment(opts);
    if (split->parsed()) return cmd_split(opts);
    if (extract->parsed()) return cmd_extract(opts);
    if (embed->parsed()) return cmd_embed_ingest(opts, embeddings_dir);
    if (train->parsed()) return cmd_train(opts, features_dir, arch_flag, log_path);
    if (eval->parsed()) return cmd_eval(opts, features_dir, model_path);
    if (report->parsed()) return cmd_report(opts, results_files, manifest_path);
    if (render->parsed()) return cmd_render(opts, waveform);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace asc::cli
