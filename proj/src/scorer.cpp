#include "morallens/scorer.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace morallens {

using nlohmann::json;
using nlohmann::ordered_json;

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(Errc::invalid_argument, "threshold must be in (0, 1), got " + std::to_string(threshold));
  }
}

std::vector<ScoredRecord> to_scored(std::span<const EmbeddingRecord> records,
                                    std::span<const double> probabilities, double threshold) {
  check_threshold(threshold);
  if (records.size() != probabilities.size()) {
    throw Error(Errc::dimension_mismatch, "record and probability counts differ");
  }
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back({records[i].id, probabilities[i], probabilities[i] >= threshold ? 1 : 0,
                   records[i].category});
  }
  return out;
}

std::string scored_to_jsonl(std::span<const ScoredRecord> scored) {
  std::ostringstream out;
  for (const auto& s : scored) {
    ordered_json j;
    j["id"] = s.id;
    j["probability"] = s.probability;
    j["verdict"] = s.verdict;
    j["category"] = s.category ? ordered_json(*s.category) : ordered_json(nullptr);
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<ScoredRecord> read_scored_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<ScoredRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ScoredRecord s;
      s.id = j.at("id").get<std::string>();
      s.probability = j.at("probability").get<double>();
      s.verdict = j.at("verdict").get<int>();
      if (j.contains("category") && !j["category"].is_null()) s.category = j["category"].get<std::string>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(Errc::manifest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

const Taxonomy& benchmark_taxonomy() {
  static const Taxonomy taxonomy = [] {
    Taxonomy t;
    for (const char* k : {"armed robbery", "burglary", "kidnapping", "car vandalism"}) t[k] = "felony";
    for (const char* k : {"drowsy driving", "slapping", "school fight", "secondhand smoking", "drunk driving",
                          "school bullying", "manspreading", "fare evasion", "bad parking", "exam cheating",
                          "affair", "middle finger", "smartphone while driving", "jaywalking",
                          "public urination"}) {
      t[k] = "antisocial behavior";
    }
    for (const char* k : {"fly-tipping", "garbage throwing", "land pollution", "air pollution",
                          "water pollution", "space junk"}) {
      t[k] = "environment";
    }
    return t;
  }();
  return taxonomy;
}

Taxonomy read_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open taxonomy " + path.string());
  Taxonomy t;
  try {
    const auto j = json::parse(in);
    for (const auto& [super, keywords] : j.items()) {
      for (const auto& k : keywords) {
        const auto key = k.get<std::string>();
        if (auto [it, inserted] = t.emplace(key, super); !inserted && it->second != super) {
          throw Error(Errc::manifest, "keyword '" + key + "' listed under two super-categories");
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::manifest, path.string() + ": " + e.what());
  }
  return t;
}

CategoryReport aggregate_by_category(std::span<const ScoredRecord> scored, const Taxonomy& taxonomy,
                                     CategoryStatistic statistic, SuperAggregation aggregation) {
  CategoryReport report;
  report.statistic = statistic;
  report.aggregation = aggregation;

  std::map<std::string, double> keyword_sums;
  std::map<std::string, std::pair<double, std::uint64_t>> pooled;
  for (const auto& s : scored) {
    if (!s.category) {
      ++report.uncategorized;
      continue;
    }
    auto it = taxonomy.find(*s.category);
    if (it == taxonomy.end()) {
      throw Error(Errc::invalid_argument, "category '" + *s.category + "' is not in the taxonomy");
    }
    const double value = statistic == CategoryStatistic::mean_probability ? s.probability : s.verdict;
    auto& kw = report.keywords[*s.category];
    kw.super_category = it->second;
    kw.count += 1;
    keyword_sums[*s.category] += value;
    auto& p = pooled[it->second];
    p.first += value;
    p.second += 1;
    ++report.categorized;
  }
  if (report.categorized == 0) {
    throw Error(Errc::empty_input, "no categorized records to aggregate");
  }

  for (auto& [keyword, kw] : report.keywords) {
    kw.value = keyword_sums[keyword] / static_cast<double>(kw.count);
    auto& sup = report.supers[kw.super_category];
    sup.keyword_count += 1;
    sup.record_count += kw.count;
    sup.value += kw.value;
  }
  for (auto& [name, sup] : report.supers) {
    if (aggregation == SuperAggregation::mean_of_keyword_means) {
      sup.value /= static_cast<double>(sup.keyword_count);
    } else {
      sup.value = pooled[name].first / static_cast<double>(pooled[name].second);
    }
  }
  return report;
}

std::string to_json(const CategoryReport& r, int indent) {
  ordered_json j;
  j["statistic"] = r.statistic == CategoryStatistic::mean_probability ? "mean_probability" : "positive_rate";
  j["super_aggregation"] =
      r.aggregation == SuperAggregation::mean_of_keyword_means ? "mean_of_keyword_means" : "pooled_records";
  j["categorized"] = r.categorized;
  j["uncategorized"] = r.uncategorized;
  ordered_json supers = ordered_json::object();
  for (const auto& [name, s] : r.supers) {
    supers[name] = {{"value", s.value}, {"keywords", s.keyword_count}, {"records", s.record_count}};
  }
  j["super_categories"] = supers;
  ordered_json keywords = ordered_json::object();
  for (const auto& [name, k] : r.keywords) {
    keywords[name] = {{"super_category", k.super_category}, {"value", k.value}, {"count", k.count}};
  }
  j["keywords"] = keywords;
  return j.dump(indent);
}

}  // namespace morallens
