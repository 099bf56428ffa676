#pragma once

#include "morallens/checkpoint.hpp"
#include "morallens/classifier_head.hpp"
#include "morallens/embedding_store.hpp"
#include "morallens/metrics.hpp"
#include "morallens/optimizer.hpp"
#include "morallens/profiles.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace morallens {

struct TrainConfig {
  std::uint32_t epochs = 100;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 0;
  EncoderProfile profile = EncoderProfile::vitb32;
  HeadConfig head;
  OptimizerConfig optim;

  /// Hyperparameters of a profile row; hidden width defaults to the input
  /// width. `dim` is required for the custom profile.
  static TrainConfig for_profile(EncoderProfile profile, Eigen::Index dim = 0);

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // example-weighted mean training loss
  double final_train_accuracy = 0;   // evaluation mode, threshold 0.5
  double wall_clock_seconds = 0;
  std::uint64_t steps = 0;
  std::uint64_t train_count = 0;
  std::uint64_t positive_count = 0;
  std::vector<std::string> warnings;
  TrainConfig config;
};

struct TrainResult {
  ClassifierHead<double> head;
  TrainReport report;
};

using EpochCallback = std::function<void(std::uint32_t epoch, double mean_loss)>;

/// Generator for initialization and dropout masks: mt19937_64 seeded through
/// std::seed_seq from the two 32-bit halves of `seed`.
std::mt19937_64 run_generator(std::uint64_t seed);

/// Fisher-Yates permutation of 0..n-1 for one epoch, drawn from an
/// mt19937_64 seeded with (seed halves, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint32_t epoch);

/// Head as it stands before the first step of `train` with this config.
ClassifierHead<double> initial_head(const TrainConfig& config);

/// Minimizes mean BCE over shuffled mini-batches with AdamW. Every record must
/// be labeled and match config.head.d_in. The final-epoch weights are returned.
TrainResult train(std::span<const EmbeddingRecord> dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Applies one AdamW update to every head tensor; biases are not decayed.
template <typename Scalar>
void apply_update(ClassifierHead<Scalar>& head, const HeadGradients<Scalar>& grads,
                  OptimizerState<Scalar>& state, const OptimizerConfig& config) {
  using Matrix = typename ClassifierHead<Scalar>::Matrix;
  Eigen::Map<Matrix> b2(&head.b2, 1, 1);
  Eigen::Map<const Matrix> gb2(&grads.b2, 1, 1);
  ParameterSlot<Scalar> slots[] = {
      {head.w1, grads.w1, true},
      {head.b1, grads.b1, false},
      {head.w2, grads.w2, true},
      {b2, gb2, false},
  };
  adamw_step<Scalar>(slots, state, config);
}

/// Evaluation-mode probabilities for each record, in order.
template <typename Scalar>
std::vector<double> predict_probabilities(const ClassifierHead<Scalar>& head,
                                          std::span<const EmbeddingRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < records.size(); start += kChunk) {
    const auto chunk = records.subspan(start, std::min(kChunk, records.size() - start));
    for (const auto& r : chunk) {
      if (r.dim() != head.config.d_in) {
        throw Error(Errc::dimension_mismatch, "record '" + r.id + "' has dimension " +
                                                  std::to_string(r.dim()) + ", head expects " +
                                                  std::to_string(head.config.d_in));
      }
    }
    const auto z = logits(head, stack_columns<Scalar>(chunk));
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      out.push_back(static_cast<double>(clamp_probability(sigmoid(z(k)))));
    }
  }
  return out;
}

/// Scores the labeled records of `split` and computes the metrics report.
template <typename Scalar>
EvaluationReport evaluate_split(const ClassifierHead<Scalar>& head,
                                std::span<const EmbeddingRecord> records, Split split,
                                double threshold = 0.5, double alpha = 0.2,
                                std::string dataset = {}) {
  const auto subset = select_split(records, split);
  if (subset.empty()) {
    throw Error(Errc::empty_input, "split '" + std::string(to_string(split)) + "' has no records");
  }
  std::vector<int> labels;
  labels.reserve(subset.size());
  for (const auto& r : subset) {
    if (!r.label) throw Error(Errc::invalid_argument, "record '" + r.id + "' in evaluation split has no label");
    labels.push_back(to_int(*r.label));
  }
  const auto probs = predict_probabilities(head, std::span<const EmbeddingRecord>(subset));
  return evaluate_scores(probs, labels, threshold, alpha, std::string(to_string(split)),
                         std::move(dataset));
}

/// Checkpoint with metadata describing the run (no wall-clock fields, so
/// identical runs give identical bytes).
ModelCheckpoint make_checkpoint(const ClassifierHead<double>& head, const TrainConfig& config,
                                std::uint64_t train_count);

std::string config_to_json(const TrainConfig& config);
std::string to_json(const TrainReport& report, int indent = 2);

}  // namespace morallens
