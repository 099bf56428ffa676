#pragma once

#include "morallens/classifier_head.hpp"
#include "morallens/embedding_store.hpp"
#include "morallens/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morallens {

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kFilterThreshold = 0.9;

struct ScoredRecord {
  std::string id;
  double probability = 0.5;
  int verdict = 0;  // 1 iff probability >= threshold
  std::optional<std::string> category;
};

void check_threshold(double threshold);

/// Verdicts are 1 when probability >= threshold.
std::vector<ScoredRecord> to_scored(std::span<const EmbeddingRecord> records,
                                    std::span<const double> probabilities, double threshold);

/// Zero-shot scoring with the head in evaluation mode. Order-preserving.
template <typename Scalar>
std::vector<ScoredRecord> score(const ClassifierHead<Scalar>& head,
                                std::span<const EmbeddingRecord> records,
                                double threshold = kDefaultThreshold) {
  check_threshold(threshold);
  const auto probs = predict_probabilities(head, records);
  return to_scored(records, probs, threshold);
}

/// JSON-Lines: {"id", "probability", "verdict", "category"}.
std::string scored_to_jsonl(std::span<const ScoredRecord> scored);
std::vector<ScoredRecord> read_scored_jsonl(const std::filesystem::path& path);

/// Keyword -> super-category.
using Taxonomy = std::map<std::string, std::string>;

/// Keywords of the visual immorality benchmark grouped into felony,
/// antisocial behavior and environment.
const Taxonomy& benchmark_taxonomy();

/// Reads {"super": ["keyword", ...], ...}.
Taxonomy read_taxonomy(const std::filesystem::path& path);

enum class CategoryStatistic { mean_probability, positive_rate };
enum class SuperAggregation { mean_of_keyword_means, pooled_records };

struct KeywordSummary {
  std::string super_category;
  std::uint64_t count = 0;
  double value = 0;
};

struct SuperSummary {
  std::uint64_t keyword_count = 0;
  std::uint64_t record_count = 0;
  double value = 0;
};

struct CategoryReport {
  CategoryStatistic statistic = CategoryStatistic::mean_probability;
  SuperAggregation aggregation = SuperAggregation::mean_of_keyword_means;
  std::map<std::string, KeywordSummary> keywords;
  std::map<std::string, SuperSummary> supers;
  std::uint64_t categorized = 0;
  std::uint64_t uncategorized = 0;
};

/// Per-keyword statistic over categorized records; super-category value is
/// the unweighted mean of its keywords' values (or the pooled record mean).
CategoryReport aggregate_by_category(std::span<const ScoredRecord> scored, const Taxonomy& taxonomy,
                                     CategoryStatistic statistic = CategoryStatistic::mean_probability,
                                     SuperAggregation aggregation = SuperAggregation::mean_of_keyword_means);

std::string to_json(const CategoryReport& report, int indent = 2);

}  // namespace morallens
