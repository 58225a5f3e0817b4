#include "asc/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace asc {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : n_classes(names.size()),
      class_names(std::move(names)),
      counts(n_classes * n_classes, 0) {}

size_t ConfusionMatrix::total() const {
  size_t t = 0;
  for (size_t c : counts) t += c;
  return t;
}

size_t ConfusionMatrix::trace() const {
  size_t t = 0;
  for (size_t i = 0; i < n_classes; ++i) t += at(i, i);
  return t;
}

size_t ConfusionMatrix::row_sum(size_t r) const {
  size_t t = 0;
  for (size_t c = 0; c < n_classes; ++c) t += at(r, c);
  return t;
}

EvalResult evaluate(const TrainedModel& tm, const FeatureSet& test_set,
                    std::vector<std::string> class_names) {
  if (test_set.size() == 0) throw ArgumentError("evaluate: empty test set");
  const size_t n_classes = tm.model.act_shapes.back()[0];
  if (class_names.empty())
    for (size_t i = 0; i < n_classes; ++i) class_names.push_back("class" + std::to_string(i));
  if (class_names.size() != n_classes)
    throw ArgumentError("evaluate: class name count does not match the model");

  EvalResult result;
  result.confusion = ConfusionMatrix(std::move(class_names));
  for (size_t i = 0; i < test_set.size(); ++i) {
    const int actual = test_set.labels[i];
    if (actual < 0 || static_cast<size_t>(actual) >= n_classes)
      throw ArgumentError("evaluate: label " + std::to_string(actual) + " out of range");
    const Tensor dist = predict(tm, test_set.features[i]);
    size_t predicted = 0;
    for (size_t k = 1; k < dist.size(); ++k)
      if (dist.v[k] > dist.v[predicted]) predicted = k;
    ++result.confusion.at(static_cast<size_t>(actual), predicted);
  }
  result.accuracy = accuracy_from_confusion(result.confusion);
  return result;
}

double accuracy_from_confusion(const ConfusionMatrix& cm) {
  const size_t total = cm.total();
  if (total == 0) throw ArgumentError("accuracy_from_confusion: empty matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::vector<double> per_class_accuracy(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.n_classes);
  for (size_t r = 0; r < cm.n_classes; ++r) {
    const size_t row = cm.row_sum(r);
    if (row == 0)
      throw ArgumentError("per_class_accuracy: class '" +
                          (r < cm.class_names.size() ? cm.class_names[r]
                                                     : std::to_string(r)) +
                          "' has no test items");
    out[r] = static_cast<double>(cm.at(r, r)) / static_cast<double>(row);
  }
  return out;
}

OverfitReport overfit_gap(const std::vector<EpochStats>& history, double threshold) {
  OverfitReport report;
  report.threshold = threshold;
  for (const EpochStats& e : history) {
    const double gap = e.train_accuracy - e.eval_accuracy;
    report.gaps.push_back(gap);
    report.max_gap = std::max(report.max_gap, gap);
    if (gap > threshold && report.first_flagged_epoch == 0)
      report.first_flagged_epoch = e.epoch;
  }
  report.flagged = report.first_flagged_epoch != 0;
  return report;
}

std::string format_percent(double fraction) {
  const double pct = fraction * 100.0;
  const double rounded = std::floor(pct * 10.0 + 0.5) / 10.0;  // half-up
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", rounded);
  return buf;
}

std::string render_results_markdown(std::span<const ResultRow> rows) {
  std::ostringstream out;
  out << "| CNN Architecture | Test Accuracy | Training Accuracy | Representation | Parameters |\n";
  out << "| --- | --- | --- | --- | --- |\n";
  for (const ResultRow& r : rows) {
    out << "| " << r.architecture << " | " << format_percent(r.test_accuracy) << " | "
        << format_percent(r.train_accuracy) << (r.overfit ? " (overfit)" : "") << " | "
        << r.representation << " | " << r.param_count << " |\n";
  }
  return out.str();
}

std::string render_results_csv(std::span<const ResultRow> rows) {
  std::ostringstream out;
  out << "architecture,representation,test_accuracy,train_accuracy,overfit,param_count\n";
  char buf[64];
  for (const ResultRow& r : rows) {
    out << r.architecture << ',' << r.representation << ',';
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.test_accuracy, r.train_accuracy);
    out << buf << ',' << (r.overfit ? "true" : "false") << ',' << r.param_count << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw FormatError("results csv line " + std::to_string(line_no) +
                        ": expected 6 fields, found " + std::to_string(fields.size()));
    ResultRow r;
    r.architecture = fields[0];
    r.representation = fields[1];
    r.test_accuracy = std::stod(fields[2]);
    r.train_accuracy = std::stod(fields[3]);
    r.overfit = fields[4] == "true";
    r.param_count = static_cast<size_t>(std::stoull(fields[5]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace asc
