#include "morallens/video_timeline.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace morallens {

std::uint64_t select_percentile_frame(std::uint64_t frame_count) {
  if (frame_count == 0) throw Error(Errc::empty_input, "clip has no frames");
  // floor(0.75 * (n - 1)) in integer arithmetic.
  return 3 * (frame_count - 1) / 4;
}

Eigen::VectorXd savgol_weights(Eigen::Index window_len, int poly_order, Eigen::Index eval_pos) {
  if (window_len < 1 || poly_order < 0 || poly_order >= window_len || eval_pos < 0 ||
      eval_pos >= window_len) {
    throw Error(Errc::invalid_argument, "invalid Savitzky-Golay window");
  }
  // Vandermonde rows in coordinates centered on the evaluation point, so the
  // fitted value there is the constant coefficient.
  Eigen::MatrixXd vander(window_len, poly_order + 1);
  for (Eigen::Index j = 0; j < window_len; ++j) {
    const double x = static_cast<double>(j - eval_pos);
    double power = 1.0;
    for (int k = 0; k <= poly_order; ++k) {
      vander(j, k) = power;
      power *= x;
    }
  }
  const Eigen::MatrixXd pinv =
      vander.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window_len, window_len));
  return pinv.row(0).transpose();
}

VideoTimeline build_timeline(std::string clip_id, std::span<const double> timestamps,
                             std::span<const double> raw, const TimelineOptions& options) {
  if (raw.empty()) throw Error(Errc::empty_input, "clip '" + clip_id + "' has no frames");
  if (timestamps.size() != raw.size()) {
    throw Error(Errc::dimension_mismatch, "clip '" + clip_id + "': timestamp and probability counts differ");
  }
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw Error(Errc::invalid_argument, "video threshold must be in (0, 1)");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(timestamps[i]) || !std::isfinite(raw[i])) {
      throw Error(Errc::non_finite, "clip '" + clip_id + "': non-finite sample " + std::to_string(i));
    }
    if (i > 0 && !(timestamps[i] > timestamps[i - 1])) {
      throw Error(Errc::invalid_argument, "clip '" + clip_id + "': timestamps are not strictly increasing at sample " +
                                              std::to_string(i));
    }
  }

  const Eigen::Map<const Eigen::VectorXd> raw_vec(raw.data(), static_cast<Eigen::Index>(raw.size()));
  const Eigen::VectorXd smooth = savgol_smooth(raw_vec, options.window, options.poly_order);

  VideoTimeline tl;
  tl.clip_id = std::move(clip_id);
  tl.options = options;
  tl.samples.reserve(raw.size());
  double sum = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    tl.samples.push_back({timestamps[i], raw[i], smooth(static_cast<Eigen::Index>(i))});
    sum += raw[i];
  }
  tl.mean = sum / static_cast<double>(raw.size());
  tl.verdict = (options.strict ? tl.mean > options.threshold : tl.mean >= options.threshold) ? 1 : 0;
  return tl;
}

std::string to_json(const VideoTimeline& tl) {
  nlohmann::ordered_json j;
  j["clip_id"] = tl.clip_id;
  auto samples = nlohmann::ordered_json::array();
  for (const auto& s : tl.samples) {
    samples.push_back({{"t", s.t}, {"p_raw", s.p_raw}, {"p_smooth", s.p_smooth}});
  }
  j["samples"] = std::move(samples);
  j["mean"] = tl.mean;
  j["verdict"] = tl.verdict;
  j["threshold"] = tl.options.threshold;
  j["tie_rule"] = tl.options.strict ? "mean > threshold" : "mean >= threshold";
  j["smoothing"] = {{"filter", "savitzky-golay"}, {"window", tl.options.window}, {"order", tl.options.poly_order}};
  return j.dump();
}

std::string to_csv(const VideoTimeline& tl) {
  std::ostringstream out;
  out.precision(17);
  out << "clip_id,t,p_raw,p_smooth\n";
  for (const auto& s : tl.samples) {
    out << tl.clip_id << ',' << s.t << ',' << s.p_raw << ',' << s.p_smooth << '\n';
  }
  return out.str();
}

}  // namespace morallens
