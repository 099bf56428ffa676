#include "morallens/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <numeric>

namespace morallens {

namespace {

using Json = nlohmann::ordered_json;

std::uint32_t low32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xFFFFFFFFu); }
std::uint32_t high32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

// Unbiased draw from [0, bound) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["profile"] = std::string(to_string(c.profile));
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["head"] = {{"d_in", c.head.d_in},
               {"d_hidden", c.head.d_hidden},
               {"dropout_p", c.head.dropout_p},
               {"layers", "dropout-linear-tanh-dropout-projection"},
               {"projection_bias", true},
               {"dropout", "inverted"},
               {"init", "uniform(+-1/sqrt(fan_in)) weights, zero biases"}};
  j["optimizer"] = {{"name", "adamw"},
                    {"lr", c.optim.lr},
                    {"beta1", c.optim.beta1},
                    {"beta2", c.optim.beta2},
                    {"epsilon", c.optim.epsilon},
                    {"weight_decay", c.optim.weight_decay},
                    {"decay_biases", false},
                    {"schedule", "constant"}};
  j["generator"] = "mt19937_64 via seed_seq";
  return j;
}

}  // namespace

TrainConfig TrainConfig::for_profile(EncoderProfile profile, Eigen::Index dim) {
  const auto& spec = profile_spec(profile);
  TrainConfig c;
  c.profile = profile;
  c.epochs = spec.epochs;
  c.batch_size = spec.batch_size;
  c.optim = optimizer_for(profile);
  c.head.d_in = spec.dim != 0 ? static_cast<Eigen::Index>(spec.dim) : dim;
  if (spec.dim != 0 && dim != 0 && dim != static_cast<Eigen::Index>(spec.dim)) {
    throw Error(Errc::dimension_mismatch, "profile " + std::string(spec.name) + " expects dimension " +
                                              std::to_string(spec.dim) + ", data has " + std::to_string(dim));
  }
  if (c.head.d_in < 1) throw Error(Errc::invalid_argument, "custom profile needs an input dimension");
  c.head.d_hidden = c.head.d_in;
  c.head.dropout_p = spec.dropout_p;
  return c;
}

void TrainConfig::validate() const {
  head.validate();
  optim.validate();
  if (batch_size == 0) throw Error(Errc::invalid_argument, "batch size must be >= 1");
  const auto& spec = profile_spec(profile);
  if (spec.dim != 0 && static_cast<Eigen::Index>(spec.dim) != head.d_in) {
    throw Error(Errc::dimension_mismatch, "profile " + std::string(spec.name) + " has dimension " +
                                              std::to_string(spec.dim) + " but head input is " +
                                              std::to_string(head.d_in));
  }
}

std::mt19937_64 run_generator(std::uint64_t seed) {
  std::seed_seq seq{low32(seed), high32(seed)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint32_t epoch) {
  std::seed_seq seq{low32(seed), high32(seed), epoch, 0x5EEDu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

ClassifierHead<double> initial_head(const TrainConfig& config) {
  config.validate();
  auto rng = run_generator(config.seed);
  return ClassifierHead<double>::initialized(config.head, rng);
}

TrainResult train(std::span<const EmbeddingRecord> dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  if (dataset.empty()) throw Error(Errc::empty_input, "training set is empty");

  const auto n = dataset.size();
  const Eigen::Index d = config.head.d_in;
  Eigen::MatrixXd inputs(d, static_cast<Eigen::Index>(n));
  Eigen::RowVectorXd targets(static_cast<Eigen::Index>(n));
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = dataset[i];
    if (!r.label) throw Error(Errc::invalid_argument, "training record '" + r.id + "' has no label");
    if (r.dim() != d) {
      throw Error(Errc::dimension_mismatch, "training record '" + r.id + "' has dimension " +
                                                std::to_string(r.dim()) + ", head expects " + std::to_string(d));
    }
    if (!r.vector.allFinite()) throw Error(Errc::non_finite, "training record '" + r.id + "' is not finite");
    inputs.col(static_cast<Eigen::Index>(i)) = r.vector.cast<double>();
    targets(static_cast<Eigen::Index>(i)) = to_int(*r.label);
    positives += to_int(*r.label);
  }

  TrainResult result;
  auto& report = result.report;
  report.config = config;
  report.train_count = n;
  report.positive_count = positives;
  if (positives == 0 || positives == n) {
    report.warnings.push_back("training set contains a single class");
  }

  auto rng = run_generator(config.seed);
  result.head = ClassifierHead<double>::initialized(config.head, rng);
  auto& head = result.head;
  OptimizerState<double> state;

  const std::size_t batch_size = config.batch_size;
  std::vector<Eigen::Index> batch_index;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto perm = epoch_permutation(n, config.seed, epoch);
    double loss_sum = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(n, start + batch_size);
      batch_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto batch = static_cast<Eigen::Index>(batch_index.size());

      const Eigen::MatrixXd xb = inputs(Eigen::all, batch_index);
      const Eigen::RowVectorXd yb = targets(batch_index);
      const auto mask = DropoutMask<double>::sample(config.head, batch, rng);
      const auto [loss, grads] = loss_and_gradients(head, xb, yb, mask);
      if (!std::isfinite(loss)) {
        throw Error(Errc::training, "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                        ", step " + std::to_string(report.steps + 1));
      }
      apply_update(head, grads, state, config.optim);
      ++report.steps;
      loss_sum += loss * static_cast<double>(batch);
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    report.epoch_losses.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }

  if (!head.all_finite()) throw Error(Errc::training, "training produced non-finite parameters");

  const auto probs = predict_probabilities(head, dataset);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += static_cast<int>(probs[i] >= 0.5) == to_int(*dataset[i].label);
  }
  report.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

ModelCheckpoint make_checkpoint(const ClassifierHead<double>& head, const TrainConfig& config,
                                std::uint64_t train_count) {
  Json meta = config_json(config);
  meta["train_count"] = train_count;
  meta["format"] = "CLMH v1, float32 little-endian";
  return {head.cast<float>(), meta.dump()};
}

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2); }

std::string to_json(const TrainReport& report, int indent) {
  Json j;
  j["config"] = config_json(report.config);
  j["train_count"] = report.train_count;
  j["positive_count"] = report.positive_count;
  j["steps"] = report.steps;
  j["epoch_losses"] = report.epoch_losses;
  j["final_train_accuracy"] = report.final_train_accuracy;
  j["warnings"] = report.warnings;
  j["timing"] = {{"wall_clock_seconds", report.wall_clock_seconds}};
  return j.dump(indent);
}

}  // namespace morallens
