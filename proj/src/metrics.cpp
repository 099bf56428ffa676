#include "morallens/metrics.hpp"

#include "morallens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace morallens {

namespace {

void check_binary(std::span<const int> values, const char* what) {
  for (int v : values) {
    if (v != 0 && v != 1) throw Error(Errc::invalid_argument, std::string(what) + " must be 0 or 1");
  }
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::dimension_mismatch, "confusion: predictions and labels differ in length");
  }
  if (predictions.empty()) throw Error(Errc::empty_input, "confusion: no examples");
  check_binary(predictions, "predictions");
  check_binary(labels, "labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(Errc::empty_input, "accuracy: no examples");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double precision(const ConfusionCounts& c) {
  const auto denom = c.tp + c.fp;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double recall(const ConfusionCounts& c) {
  const auto denom = c.tp + c.fn;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f_measure(double p, double r, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(Errc::invalid_argument, "f_measure: alpha must be in (0, 1)");
  }
  if (!(p >= 0.0 && p <= 1.0) || !(r >= 0.0 && r <= 1.0)) {
    throw Error(Errc::invalid_argument, "f_measure: precision and recall must be in [0, 1]");
  }
  if (p == 0.0 || r == 0.0) return 0.0;
  return 1.0 / (alpha / p + (1.0 - alpha) / r);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::dimension_mismatch, "roc_auc: scores and labels differ in length");
  }
  check_binary(labels, "labels");
  const auto n_pos = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(Errc::invalid_argument, "roc_auc: needs at least one positive and one negative");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw Error(Errc::non_finite, "roc_auc: NaN score");
  }

  // Sort once, walk groups of tied scores. Each positive earns 1 per negative
  // strictly below it and 1/2 per negative in its tie group. Counts are kept
  // doubled so the sum stays an exact integer.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t twice_wins = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_wins += pos * (2 * negatives_below + neg);
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvaluationReport evaluate_scores(std::span<const double> probabilities, std::span<const int> labels,
                                 double threshold, double alpha, std::string split,
                                 std::string dataset) {
  if (probabilities.empty()) throw Error(Errc::empty_input, "evaluate: no examples");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(Errc::invalid_argument, "threshold must be in (0, 1)");
  }
  std::vector<int> predictions(probabilities.size());
  std::transform(probabilities.begin(), probabilities.end(), predictions.begin(),
                 [threshold](double p) { return p >= threshold ? 1 : 0; });

  EvaluationReport r;
  r.confusion = confusion(predictions, labels);
  r.accuracy = accuracy(r.confusion);
  r.precision = precision(r.confusion);
  r.recall = recall(r.confusion);
  r.precision_defined = r.confusion.tp + r.confusion.fp > 0;
  r.recall_defined = r.confusion.tp + r.confusion.fn > 0;
  r.alpha = alpha;
  r.f_alpha = f_measure(r.precision, r.recall, alpha);
  const bool both_classes = r.confusion.tp + r.confusion.fn > 0 && r.confusion.tn + r.confusion.fp > 0;
  if (both_classes) r.auc = roc_auc(probabilities, labels);
  r.threshold = threshold;
  r.split = std::move(split);
  r.dataset = std::move(dataset);
  return r;
}

std::string to_json(const EvaluationReport& r, int indent) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["split"] = r.split;
  j["threshold"] = r.threshold;
  j["count"] = r.confusion.total();
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["precision_defined"] = r.precision_defined;
  j["recall"] = r.recall;
  j["recall_defined"] = r.recall_defined;
  j["f_alpha"] = r.f_alpha;
  j["alpha"] = r.alpha;
  j["f_convention"] = "F = 1/(alpha/P + (1-alpha)/R), 0 if P or R is 0; alpha=0.2 equals F_beta=2";
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["auc_convention"] = "Mann-Whitney rank statistic, ties count 1/2";
  return j.dump(indent);
}

std::string render_f_table(std::span<const std::string> profile_columns,
                           std::span<const FTableRow> rows, double alpha) {
  std::size_t w_dataset = 7;
  std::size_t w_contents = 8;
  for (const auto& row : rows) {
    w_dataset = std::max(w_dataset, row.dataset.size());
    w_contents = std::max(w_contents, row.contents.size());
  }
  std::ostringstream out;
  char alpha_text[32];
  std::snprintf(alpha_text, sizeof alpha_text, "F-measure (alpha=%g)", alpha);
  out << alpha_text << '\n';

  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  out << pad("Dataset", w_dataset) << "  " << pad("Contents", w_contents) << "  " << pad("# Immoral", 9);
  for (const auto& col : profile_columns) out << "  " << pad(col, std::max<std::size_t>(col.size(), 6));
  out << '\n';
  for (const auto& row : rows) {
    out << pad(row.dataset, w_dataset) << "  " << pad(row.contents, w_contents) << "  "
        << pad(std::to_string(row.immoral_count), 9);
    for (std::size_t k = 0; k < profile_columns.size(); ++k) {
      std::string cell = "-";
      if (k < row.f_values.size() && row.f_values[k]) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.3f", *row.f_values[k]);
        cell = buf;
      }
      out << "  " << pad(cell, std::max<std::size_t>(profile_columns[k].size(), 6));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace morallens
