#pragma once

// Reference computations used by the unit and acceptance tests. None of these
// call into the library's numerical code paths.

#include "morallens/embedding_store.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oracle {

/// O(n^2) pair count with half credit for ties.
inline double brute_force_auc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Plain-loop head used for finite differences: w1 row-major d_hidden x d_in.
struct NaiveHead {
  int d_in = 0;
  int d_hidden = 0;
  std::vector<long double> w1, b1, w2;
  long double b2 = 0;

  long double logit(const std::vector<double>& x) const {
    long double z = b2;
    for (int h = 0; h < d_hidden; ++h) {
      long double pre = b1[h];
      for (int i = 0; i < d_in; ++i) pre += w1[h * d_in + i] * x[i];
      z += w2[h] * std::tanh(pre);
    }
    return z;
  }

  /// Mean BCE by the textbook formula in extended precision.
  long double loss(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) const {
    long double total = 0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const long double p = 1.0L / (1.0L + std::exp(-logit(xs[b])));
      total += -(ys[b] * std::log(p) + (1 - ys[b]) * std::log(1.0L - p));
    }
    return total / static_cast<long double>(xs.size());
  }

  std::vector<long double*> parameters() {
    std::vector<long double*> out;
    for (auto& v : w1) out.push_back(&v);
    for (auto& v : b1) out.push_back(&v);
    for (auto& v : w2) out.push_back(&v);
    out.push_back(&b2);
    return out;
  }

  /// Central differences of the mean loss, in the order of `parameters()`.
  std::vector<double> central_differences(const std::vector<std::vector<double>>& xs,
                                          const std::vector<int>& ys, long double step) {
    std::vector<double> grads;
    for (long double* p : parameters()) {
      const long double saved = *p;
      *p = saved + step;
      const long double up = loss(xs, ys);
      *p = saved - step;
      const long double down = loss(xs, ys);
      *p = saved;
      grads.push_back(static_cast<double>((up - down) / (2 * step)));
    }
    return grads;
  }
};

/// Straight-line AdamW on one scalar, written out term by term.
struct ScalarAdamW {
  double lr, beta1, beta2, eps, decay;
  double theta;
  double m = 0, v = 0;
  double beta1_power = 1, beta2_power = 1;

  void step(double g) {
    beta1_power = beta1_power * beta1;
    beta2_power = beta2_power * beta2;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double m_hat = m / (1 - beta1_power);
    const double v_hat = v / (1 - beta2_power);
    const double adaptive = m_hat / (std::sqrt(v_hat) + eps);
    const double shrink = decay * theta;
    theta = theta - lr * (adaptive + shrink);
  }
};

/// Closed-form quadratic/cubic Savitzky-Golay smoothing weight for offset j
/// in a centered window of half-width m.
inline double savgol_quadratic_weight(int m, int j) {
  const double num = 3.0 * (3.0 * m * m + 3.0 * m - 1.0) - 15.0 * j * j;
  const double den = (2.0 * m + 3.0) * (2.0 * m + 1.0) * (2.0 * m - 1.0);
  return num / den;
}

/// Two Gaussian clusters at +-mu (per-component `mean_shift` along a random
/// sign pattern), unit noise. Label 1 for the +mu cluster.
inline std::vector<morallens::EmbeddingRecord> two_clusters(int dim, int per_class, double mean_shift,
                                                            std::uint64_t seed,
                                                            morallens::Split split = morallens::Split::train,
                                                            std::uint64_t direction_seed = 99) {
  std::mt19937_64 dir_rng(direction_seed);
  std::vector<float> direction(static_cast<std::size_t>(dim));
  for (auto& d : direction) d = (dir_rng() & 1) ? 1.0f : -1.0f;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<morallens::EmbeddingRecord> out;
  for (int k = 0; k < 2 * per_class; ++k) {
    const int label = k % 2;
    morallens::EmbeddingRecord r;
    r.id = "s" + std::to_string(seed) + "_" + std::to_string(k);
    r.vector.resize(dim);
    for (int i = 0; i < dim; ++i) {
      const double center = (label == 1 ? 1.0 : -1.0) * mean_shift * direction[static_cast<std::size_t>(i)];
      r.vector[i] = static_cast<float>(center + noise(rng));
    }
    r.label = label == 1 ? morallens::Label::immoral : morallens::Label::moral;
    r.split = split;
    r.source = "synthetic";
    out.push_back(std::move(r));
  }
  return out;
}

/// Full-batch gradient descent logistic regression; returns training accuracy.
inline double logistic_regression_accuracy(const std::vector<morallens::EmbeddingRecord>& data,
                                           int iterations = 200, double lr = 0.1) {
  const std::size_t dim = static_cast<std::size_t>(data.front().vector.size());
  std::vector<double> w(dim, 0.0);
  double b = 0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> gw(dim, 0.0);
    double gb = 0;
    for (const auto& r : data) {
      double z = b;
      for (std::size_t i = 0; i < dim; ++i) z += w[i] * r.vector[static_cast<Eigen::Index>(i)];
      const double err = 1.0 / (1.0 + std::exp(-z)) - static_cast<int>(*r.label);
      for (std::size_t i = 0; i < dim; ++i) gw[i] += err * r.vector[static_cast<Eigen::Index>(i)];
      gb += err;
    }
    for (std::size_t i = 0; i < dim; ++i) w[i] -= lr * gw[i] / static_cast<double>(data.size());
    b -= lr * gb / static_cast<double>(data.size());
  }
  std::size_t correct = 0;
  for (const auto& r : data) {
    double z = b;
    for (std::size_t i = 0; i < dim; ++i) z += w[i] * r.vector[static_cast<Eigen::Index>(i)];
    correct += (z >= 0 ? 1 : 0) == static_cast<int>(*r.label);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace oracle
