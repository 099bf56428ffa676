#include "cli.hpp"

#include "morallens/checkpoint.hpp"
#include "morallens/embedding_store.hpp"
#include "morallens/error.hpp"
#include "morallens/metrics.hpp"
#include "morallens/profiles.hpp"
#include "morallens/scorer.hpp"
#include "morallens/trainer.hpp"
#include "morallens/video_timeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace morallens::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kSeedEnv = "MORAL_LENS_SEED";

struct DataArgs {
  std::string manifest;
  std::string embeddings;
};

void add_data_options(CLI::App& cmd, DataArgs& data) {
  cmd.add_option("--manifest", data.manifest, "JSON-Lines dataset manifest")->required();
  cmd.add_option("--embeddings", data.embeddings,
                 "CLEM embedding file (default: the manifest's embedding_file, relative to the manifest)");
}

std::vector<EmbeddingRecord> load_records(const DataArgs& data) {
  const fs::path manifest_path = data.manifest;
  const auto manifest = read_manifest(manifest_path);
  fs::path embeddings = data.embeddings;
  if (embeddings.empty()) {
    if (manifest.embedding_file.empty()) {
      throw Error(Errc::invalid_argument, "no --embeddings given and " + manifest_path.string() +
                                              " names no embedding_file");
    }
    embeddings = manifest.embedding_file.is_absolute() ? manifest.embedding_file
                                                        : manifest_path.parent_path() / manifest.embedding_file;
  }
  return apply_label_adapters(read_embedding_file(embeddings, manifest));
}

ClassifierHead<double> load_head(const std::string& path, std::string* profile = nullptr) {
  const auto ckpt = read_checkpoint(path);
  if (profile) {
    *profile = fs::path(path).stem().string();
    const auto meta = nlohmann::json::parse(ckpt.metadata_json);
    if (meta.is_object() && meta.contains("profile")) *profile = meta["profile"].get<std::string>();
  }
  return ckpt.head.cast<double>();
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::trunc);
      if (!file_) throw Error(Errc::io, "cannot open for writing " + path);
    }
    stream_ = file_.is_open() ? static_cast<std::ostream*>(&file_) : &fallback;
  }

  std::ostream& stream() { return *stream_; }

  void finish(const std::string& path) {
    stream_->flush();
    if (!*stream_) throw Error(Errc::io, "write failed: " + (path.empty() ? std::string("stdout") : path));
  }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  Output o(path, fallback);
  o.stream() << text;
  o.finish(path);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnv); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(Errc::invalid_argument, std::string(kSeedEnv) + " is not an unsigned integer: " + env);
  }
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  DataArgs data;
  std::string profile = "vitb32";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> epochs;
  std::optional<std::uint32_t> batch_size;
  std::optional<Eigen::Index> hidden;
  std::optional<double> dropout;
  std::optional<double> lr;
  std::optional<double> epsilon;
  std::optional<double> weight_decay;
  std::string out;
  std::string report;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto profile = parse_profile(a.profile);
  const auto records = load_records(a.data);
  const auto train_set = select_split(records, Split::train);
  if (train_set.empty()) throw Error(Errc::empty_input, "manifest has no split=train records");

  auto config = TrainConfig::for_profile(profile, train_set.front().dim());
  config.seed = resolve_seed(a.seed);
  if (a.epochs) config.epochs = *a.epochs;
  if (a.batch_size) config.batch_size = *a.batch_size;
  if (a.hidden) config.head.d_hidden = *a.hidden;
  if (a.dropout) config.head.dropout_p = *a.dropout;
  if (a.lr) config.optim.lr = *a.lr;
  if (a.epsilon) config.optim.epsilon = *a.epsilon;
  if (a.weight_decay) config.optim.weight_decay = *a.weight_decay;

  EpochCallback progress;
  if (!a.quiet) {
    progress = [&err, total = config.epochs](std::uint32_t epoch, double loss) {
      if (epoch == 1 || epoch == total || epoch % 10 == 0) {
        err << "epoch " << epoch << "/" << total << " loss " << loss << '\n';
      }
    };
  }
  const auto result = train(train_set, config, progress);
  for (const auto& w : result.report.warnings) err << "warning: " << w << '\n';

  write_checkpoint(make_checkpoint(result.head, config, train_set.size()), a.out);
  write_text(a.report, to_json(result.report) + "\n", out);
  return 0;
}

// ---- score -----------------------------------------------------------------

struct ScoreArgs {
  DataArgs data;
  std::string model;
  std::string split;
  std::optional<double> threshold;
  std::string preset = "default";
  std::string out;
};

double preset_threshold(const std::string& preset, const std::optional<double>& threshold) {
  if (threshold) return *threshold;
  if (preset == "filter") return kFilterThreshold;
  return kDefaultThreshold;
}

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream&) {
  const auto head = load_head(a.model);
  auto records = load_records(a.data);
  if (!a.split.empty()) records = select_split(records, parse_split(a.split));
  const auto scored = score(head, std::span<const EmbeddingRecord>(records),
                            preset_threshold(a.preset, a.threshold));
  write_text(a.out, scored_to_jsonl(scored), out);
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::vector<std::string> models;
  std::string scores;
  std::string split = "test";
  std::optional<double> threshold;
  std::string preset = "default";
  double alpha = 0.2;
  std::string dataset;
  std::string contents;
  std::string format = "json";
  std::string out;
};

EvaluationReport eval_from_scores(const EvalArgs& a, const std::vector<EmbeddingRecord>& subset,
                                  double threshold) {
  const auto scored = read_scored_jsonl(a.scores);
  std::unordered_map<std::string, double> by_id;
  for (const auto& s : scored) by_id.emplace(s.id, s.probability);
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& r : subset) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error(Errc::count_mismatch, "no score for record '" + r.id + "' in " + a.scores);
    if (!r.label) throw Error(Errc::invalid_argument, "record '" + r.id + "' has no label");
    probs.push_back(it->second);
    labels.push_back(to_int(*r.label));
  }
  return evaluate_scores(probs, labels, threshold, a.alpha, a.split, a.dataset);
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  if (a.models.empty() == a.scores.empty()) {
    throw Error(Errc::invalid_argument, "eval needs either --model or --scores");
  }
  const auto records = load_records(a.data);
  const auto split = parse_split(a.split);
  const auto subset = select_split(records, split);
  const double threshold = preset_threshold(a.preset, a.threshold);

  std::vector<std::string> columns;
  std::vector<EvaluationReport> reports;
  if (!a.scores.empty()) {
    columns.push_back("scores");
    reports.push_back(eval_from_scores(a, subset, threshold));
  } else {
    for (const auto& path : a.models) {
      std::string profile;
      const auto head = load_head(path, &profile);
      columns.push_back(profile);
      reports.push_back(evaluate_split(head, std::span<const EmbeddingRecord>(records), split, threshold,
                                       a.alpha, a.dataset));
    }
  }

  std::string text;
  if (a.format == "table") {
    FTableRow row{a.dataset.empty() ? a.data.manifest : a.dataset, a.contents,
                  reports.front().confusion.tp + reports.front().confusion.fn, {}};
    for (const auto& r : reports) row.f_values.push_back(r.f_alpha);
    text = render_f_table(columns, std::span<const FTableRow>(&row, 1), a.alpha);
  } else if (reports.size() == 1) {
    text = to_json(reports.front()) + "\n";
  } else {
    for (const auto& r : reports) text += to_json(r, -1) + "\n";
  }
  write_text(a.out, text, out);
  return 0;
}

// ---- video -----------------------------------------------------------------

struct VideoArgs {
  std::string model;
  std::string embeddings;
  std::string frames;
  TimelineOptions options;
  std::string out;
  std::string csv;
};

int cmd_video(const VideoArgs& a, std::ostream& out, std::ostream&) {
  const auto head = load_head(a.model);
  const auto matrix = read_embedding_matrix(a.embeddings);

  std::ifstream in(a.frames);
  if (!in) throw Error(Errc::io, "cannot open frame manifest " + a.frames);
  std::vector<std::string> order;
  std::map<std::string, std::vector<TimedFrame>> clips;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto clip = j.at("clip_id").get<std::string>();
      const auto row = j.at("row").get<std::uint64_t>();
      if (row >= static_cast<std::uint64_t>(matrix.rows())) {
        throw Error(Errc::count_mismatch, "row " + std::to_string(row) + " is past the end of " + a.embeddings);
      }
      TimedFrame f;
      f.t = j.at("t").get<double>();
      f.record.id = clip + "@" + std::to_string(f.t);
      f.record.vector = matrix.row(static_cast<Eigen::Index>(row)).transpose();
      if (!clips.contains(clip)) order.push_back(clip);
      clips[clip].push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::manifest, a.frames + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), a.frames + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (order.empty()) throw Error(Errc::empty_input, a.frames + " lists no frames");

  std::string json_text;
  std::string csv_text;
  for (const auto& clip : order) {
    const auto tl = score_timeline(head, clip, std::span<const TimedFrame>(clips[clip]), a.options);
    json_text += to_json(tl) + "\n";
    auto csv = to_csv(tl);
    if (!csv_text.empty()) csv.erase(0, csv.find('\n') + 1);
    csv_text += csv;
  }
  write_text(a.out, json_text, out);
  if (!a.csv.empty()) write_text(a.csv, csv_text, out);
  return 0;
}

// ---- aggregate -------------------------------------------------------------

struct AggregateArgs {
  std::string scores;
  std::string taxonomy;
  std::string statistic = "mean";
  bool pooled = false;
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out, std::ostream&) {
  const auto scored = read_scored_jsonl(a.scores);
  const auto taxonomy = a.taxonomy.empty() ? benchmark_taxonomy() : read_taxonomy(a.taxonomy);
  const auto statistic = a.statistic == "rate" ? CategoryStatistic::positive_rate : CategoryStatistic::mean_probability;
  const auto aggregation = a.pooled ? SuperAggregation::pooled_records : SuperAggregation::mean_of_keyword_means;
  write_text(a.out, to_json(aggregate_by_category(scored, taxonomy, statistic, aggregation)) + "\n", out);
  return 0;
}

// ---- inspect ---------------------------------------------------------------

int cmd_inspect(const std::string& path, std::ostream& out, std::ostream&) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const std::string tag(magic, static_cast<std::size_t>(in.gcount()));
  Json j;
  j["path"] = path;
  if (tag == "CLEM") {
    const auto h = read_embedding_header(path);
    read_embedding_matrix(path);  // validates payload
    j["format"] = "CLEM";
    j["version"] = EmbeddingFileHeader::kVersion;
    j["dim"] = h.dim;
    j["count"] = h.count;
    j["payload_bytes"] = h.payload_bytes();
  } else if (tag == "CLMH") {
    const auto ckpt = read_checkpoint(path);
    j["format"] = "CLMH";
    j["version"] = ModelCheckpoint::kVersion;
    j["d_in"] = ckpt.head.config.d_in;
    j["d_hidden"] = ckpt.head.config.d_hidden;
    j["metadata"] = Json::parse(ckpt.metadata_json);
  } else {
    throw Error(Errc::bad_magic, path + ": neither CLEM nor CLMH");
  }
  out << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"moral-lens: train and apply a commonsense-immorality head on frozen joint embeddings",
               "moral-lens"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a head on split=train records");
  add_data_options(*train_cmd, train_args.data);
  train_cmd->add_option("--profile", train_args.profile, "Encoder profile: vitb32, vitb16, vitl14, custom")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, std::string("Seed (fallback: $") + kSeedEnv + ", then 0)");
  train_cmd->add_option("--epochs", train_args.epochs, "Override the profile's epoch count");
  train_cmd->add_option("--batch-size", train_args.batch_size, "Override the profile's batch size");
  train_cmd->add_option("--hidden", train_args.hidden, "Hidden width (default: input width)");
  train_cmd->add_option("--dropout", train_args.dropout, "Dropout probability at both sites");
  train_cmd->add_option("--lr", train_args.lr, "Override the profile's learning rate");
  train_cmd->add_option("--epsilon", train_args.epsilon, "Override the profile's AdamW epsilon");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "Override the decoupled weight decay");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path (CLMH)")->required();
  train_cmd->add_option("--report", train_args.report, "Training report path (default: stdout)");
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-epoch progress on stderr");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score records zero-shot; writes JSON-Lines");
  add_data_options(*score_cmd, score_args.data);
  score_cmd->add_option("--model", score_args.model, "Checkpoint path")->required();
  score_cmd->add_option("--split", score_args.split, "Only score this split");
  score_cmd->add_option("--threshold", score_args.threshold, "Verdict threshold (>= is immoral)");
  score_cmd->add_option("--preset", score_args.preset, "default (0.5) or filter (0.9)")
      ->check(CLI::IsMember({"default", "filter"}));
  score_cmd->add_option("--out", score_args.out, "Output path (default: stdout)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a split from a model or from a prior score run");
  add_data_options(*eval_cmd, eval_args.data);
  eval_cmd->add_option("--model", eval_args.models, "Checkpoint path (repeat for table columns)");
  eval_cmd->add_option("--scores", eval_args.scores, "JSON-Lines output of a prior score run");
  eval_cmd->add_option("--split", eval_args.split, "Split to evaluate")->capture_default_str();
  eval_cmd->add_option("--threshold", eval_args.threshold, "Verdict threshold (>= is immoral)");
  eval_cmd->add_option("--preset", eval_args.preset, "default (0.5) or filter (0.9)")
      ->check(CLI::IsMember({"default", "filter"}));
  eval_cmd->add_option("--alpha", eval_args.alpha, "F-measure alpha")->capture_default_str();
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset name for the report");
  eval_cmd->add_option("--contents", eval_args.contents, "Contents column for --format table");
  eval_cmd->add_option("--format", eval_args.format, "json or table")->check(CLI::IsMember({"json", "table"}));
  eval_cmd->add_option("--out", eval_args.out, "Output path (default: stdout)");

  VideoArgs video_args;
  auto* video_cmd = app.add_subcommand("video", "Per-frame timelines and clip verdicts");
  video_cmd->add_option("--model", video_args.model, "Checkpoint path")->required();
  video_cmd->add_option("--embeddings", video_args.embeddings, "CLEM file of frame embeddings")->required();
  video_cmd->add_option("--frames", video_args.frames, "JSON-Lines of {clip_id, t, row}")->required();
  video_cmd->add_option("--threshold", video_args.options.threshold, "Clip verdict threshold on the mean")
      ->capture_default_str();
  video_cmd->add_flag("--strict", video_args.options.strict, "Verdict on mean > threshold instead of >=");
  video_cmd->add_option("--window", video_args.options.window, "Savitzky-Golay window")->capture_default_str();
  video_cmd->add_option("--order", video_args.options.poly_order, "Savitzky-Golay order")->capture_default_str();
  video_cmd->add_option("--out", video_args.out, "Timeline JSON-Lines path (default: stdout)");
  video_cmd->add_option("--csv", video_args.csv, "Also write a CSV for plotting");

  AggregateArgs agg_args;
  auto* agg_cmd = app.add_subcommand("aggregate", "Per-keyword and super-category summary of scores");
  agg_cmd->add_option("--scores", agg_args.scores, "JSON-Lines output of a score run")->required();
  agg_cmd->add_option("--taxonomy", agg_args.taxonomy, "JSON {super: [keyword, ...]} (default: built-in)");
  agg_cmd->add_option("--statistic", agg_args.statistic, "mean (probability) or rate (positive verdicts)")
      ->check(CLI::IsMember({"mean", "rate"}));
  agg_cmd->add_flag("--pooled", agg_args.pooled, "Super-category value over pooled records");
  agg_cmd->add_option("--out", agg_args.out, "Output path (default: stdout)");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump the header of a CLEM or CLMH file");
  inspect_cmd->add_option("file", inspect_path, "File to inspect")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*score_cmd) return cmd_score(score_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*video_cmd) return cmd_video(video_args, out, err);
    if (*agg_cmd) return cmd_aggregate(agg_args, out, err);
    if (*inspect_cmd) return cmd_inspect(inspect_path, out, err);
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_input_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace morallens::cli
