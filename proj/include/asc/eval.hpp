#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asc/models.hpp"

namespace asc {

// Actual-by-predicted counts; row r sums to the number of test items whose
// actual class is r.
struct ConfusionMatrix {
  size_t n_classes = 0;
  std::vector<std::string> class_names;
  std::vector<size_t> counts;  // row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> names);

  size_t& at(size_t actual, size_t predicted) {
    return counts[actual * n_classes + predicted];
  }
  size_t at(size_t actual, size_t predicted) const {
    return counts[actual * n_classes + predicted];
  }
  size_t total() const;
  size_t trace() const;
  size_t row_sum(size_t r) const;
};

struct EvalResult {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
};

// One argmax prediction per test item (ties resolve to the lowest class
// index); accuracy is trace/total.
EvalResult evaluate(const TrainedModel& tm, const FeatureSet& test_set,
                    std::vector<std::string> class_names = {});

double accuracy_from_confusion(const ConfusionMatrix& cm);

// counts[r][r] / row_sum(r) per class.
std::vector<double> per_class_accuracy(const ConfusionMatrix& cm);

struct OverfitReport {
  std::vector<double> gaps;  // train - eval accuracy per epoch
  double max_gap = 0.0;
  int first_flagged_epoch = 0;  // 0 when never exceeded
  bool flagged = false;
  double threshold = 0.0;
};

// Train-minus-eval accuracy gap per epoch; flagged when any epoch's gap
// exceeds the threshold.
OverfitReport overfit_gap(const std::vector<EpochStats>& history, double threshold = 0.10);

struct ResultRow {
  std::string architecture;
  std::string representation;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  bool overfit = false;
  size_t param_count = 0;
};

// Accuracies are printed as one-decimal percentages (half-up); overfit rows
// carry a "(overfit)" suffix on the training accuracy.
std::string render_results_markdown(std::span<const ResultRow> rows);

// Full-precision numeric columns so parse(render(rows)) is exact.
std::string render_results_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

// One-decimal percent with half-up rounding, e.g. 0.762 -> "76.2%".
std::string format_percent(double fraction);

}  // namespace asc
