#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morallens {

/// Positive class is 1 = immoral.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

double accuracy(const ConfusionCounts& c);

/// tp / (tp + fp); 0 when nothing was predicted positive.
double precision(const ConfusionCounts& c);

/// tp / (tp + fn); 0 when there are no positives.
double recall(const ConfusionCounts& c);

/// van Rijsbergen F: 1 / (alpha/P + (1-alpha)/R), 0 when P or R is 0.
/// alpha = 0.2 weights recall and equals F_beta with beta = 2.
double f_measure(double precision, double recall, double alpha = 0.2);

/// ROC AUC as the Mann-Whitney statistic: the fraction of positive/negative
/// pairs where the positive scores higher, ties counted as one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct EvaluationReport {
  ConfusionCounts confusion;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  bool precision_defined = true;  // false when tp + fp == 0
  bool recall_defined = true;     // false when tp + fn == 0
  double alpha = 0.2;
  double f_alpha = 0;
  std::optional<double> auc;  // absent when the split has a single class
  double threshold = 0.5;
  std::string split;
  std::string dataset;
};

/// Thresholds probabilities (>= threshold is positive) and computes every
/// metric of the report.
EvaluationReport evaluate_scores(std::span<const double> probabilities, std::span<const int> labels,
                                 double threshold, double alpha = 0.2, std::string split = {},
                                 std::string dataset = {});

std::string to_json(const EvaluationReport& report, int indent = 2);

/// One row of the zero-shot F-measure table: dataset, contents, count of
/// immoral examples, and one F value per encoder profile column.
struct FTableRow {
  std::string dataset;
  std::string contents;
  std::uint64_t immoral_count = 0;
  std::vector<std::optional<double>> f_values;
};

std::string render_f_table(std::span<const std::string> profile_columns,
                           std::span<const FTableRow> rows, double alpha = 0.2);

}  // namespace morallens
