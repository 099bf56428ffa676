#pragma once

#include "morallens/classifier_head.hpp"
#include "morallens/embedding_store.hpp"
#include "morallens/trainer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace morallens {

/// Index of the 75th-percentile frame of a clip in temporal order:
/// floor(0.75 * (frame_count - 1)).
std::uint64_t select_percentile_frame(std::uint64_t frame_count);

/// Least-squares weights that map `window_len` consecutive samples to the
/// value at sample `eval_pos` (0-based inside the window) of the best-fitting
/// polynomial of degree `poly_order`.
Eigen::VectorXd savgol_weights(Eigen::Index window_len, int poly_order, Eigen::Index eval_pos);

/// Savitzky-Golay smoothing. Interior samples use the centered window. Near
/// the ends the window is shifted to stay inside the series and the fit is
/// evaluated off-center; a series shorter than the window is fit once as a
/// whole (degree capped at n - 1).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> savgol_smooth(
    const Eigen::MatrixBase<Derived>& values, int window = 5, int poly_order = 2) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (window < 1 || window % 2 == 0) throw Error(Errc::invalid_argument, "window must be a positive odd integer");
  if (poly_order < 0 || poly_order >= window) {
    throw Error(Errc::invalid_argument, "polynomial order must be in [0, window)");
  }
  const Eigen::Index n = values.size();
  if (n < 1) throw Error(Errc::empty_input, "cannot smooth an empty series");

  const Eigen::Index len = std::min<Eigen::Index>(window, n);
  const int order = static_cast<int>(std::min<Eigen::Index>(poly_order, len - 1));
  const Eigen::Index half = len / 2;

  Vector out(n);
  const Eigen::VectorXd center = savgol_weights(len, order, half);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index start = std::clamp<Eigen::Index>(i - half, 0, n - len);
    const Eigen::Index pos = i - start;
    const auto segment = values.derived().segment(start, len).template cast<double>();
    const double v = pos == half ? center.dot(segment) : savgol_weights(len, order, pos).dot(segment);
    out(i) = static_cast<Scalar>(v);
  }
  return out;
}

struct TimelineOptions {
  double threshold = 0.7;
  bool strict = false;  // verdict on mean > threshold instead of >=
  int window = 5;
  int poly_order = 2;
};

struct TimelineSample {
  double t = 0;
  double p_raw = 0;
  double p_smooth = 0;
};

struct VideoTimeline {
  std::string clip_id;
  std::vector<TimelineSample> samples;
  double mean = 0;  // over raw probabilities
  int verdict = 0;
  TimelineOptions options;
};

/// Builds a timeline from raw per-frame probabilities. Timestamps must be
/// strictly increasing. Smoothing is for display; the verdict uses the raw mean.
VideoTimeline build_timeline(std::string clip_id, std::span<const double> timestamps,
                             std::span<const double> raw_probabilities,
                             const TimelineOptions& options = {});

struct TimedFrame {
  double t = 0;
  EmbeddingRecord record;
};

template <typename Scalar>
VideoTimeline score_timeline(const ClassifierHead<Scalar>& head, std::string clip_id,
                             std::span<const TimedFrame> frames, const TimelineOptions& options = {}) {
  if (frames.empty()) throw Error(Errc::empty_input, "clip '" + clip_id + "' has no frames");
  std::vector<EmbeddingRecord> records;
  std::vector<double> timestamps;
  records.reserve(frames.size());
  timestamps.reserve(frames.size());
  for (const auto& f : frames) {
    records.push_back(f.record);
    timestamps.push_back(f.t);
  }
  const auto probs = predict_probabilities(head, std::span<const EmbeddingRecord>(records));
  return build_timeline(std::move(clip_id), timestamps, probs, options);
}

std::string to_json(const VideoTimeline& timeline);
std::string to_csv(const VideoTimeline& timeline);

}  // namespace morallens
