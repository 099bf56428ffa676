#pragma once

#include "morallens/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace morallens {

struct OptimizerConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    if (!(lr > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw Error(Errc::invalid_argument, "betas must be in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw Error(Errc::invalid_argument, "epsilon must be > 0");
    if (!(weight_decay >= 0.0)) throw Error(Errc::invalid_argument, "weight decay must be >= 0");
  }

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

template <typename Scalar>
struct OptimizerState {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::uint64_t step = 0;
  std::vector<Matrix> m;  // first moments, one per parameter tensor
  std::vector<Matrix> v;  // second moments
};

/// One parameter tensor with its gradient. Vectors and scalars bind through
/// Eigen::Ref / Eigen::Map. `decay` is false for biases.
template <typename Scalar>
struct ParameterSlot {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Eigen::Ref<Matrix> value;
  Eigen::Ref<const Matrix> grad;
  bool decay = true;
};

/// Decoupled weight-decay Adam:
///   t += 1
///   m = b1 m + (1 - b1) g
///   v = b2 v + (1 - b2) g^2
///   theta -= lr * (m / (1 - b1^t) / (sqrt(v / (1 - b2^t)) + eps) + lambda theta)
/// with lambda = 0 for slots whose `decay` flag is false. Moments are sized on
/// the first call.
template <typename Scalar>
void adamw_step(std::span<ParameterSlot<Scalar>> slots, OptimizerState<Scalar>& state,
                const OptimizerConfig& config) {
  using Matrix = typename OptimizerState<Scalar>::Matrix;

  if (state.m.empty()) {
    for (const auto& s : slots) {
      state.m.push_back(Matrix::Zero(s.value.rows(), s.value.cols()));
      state.v.push_back(Matrix::Zero(s.value.rows(), s.value.cols()));
    }
  }
  if (state.m.size() != slots.size()) {
    throw Error(Errc::dimension_mismatch, "optimizer state tracks " + std::to_string(state.m.size()) +
                                              " tensors, step received " + std::to_string(slots.size()));
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    if (s.grad.rows() != s.value.rows() || s.grad.cols() != s.value.cols() ||
        state.m[k].rows() != s.value.rows() || state.m[k].cols() != s.value.cols()) {
      throw Error(Errc::dimension_mismatch, "parameter " + std::to_string(k) + " shape disagrees with its gradient or state");
    }
    if (!s.grad.allFinite()) {
      throw Error(Errc::non_finite, "gradient of parameter " + std::to_string(k) + " is not finite");
    }
  }

  state.step += 1;
  const auto t = static_cast<Scalar>(state.step);
  const auto beta1 = static_cast<Scalar>(config.beta1);
  const auto beta2 = static_cast<Scalar>(config.beta2);
  const auto lr = static_cast<Scalar>(config.lr);
  const auto eps = static_cast<Scalar>(config.epsilon);
  const Scalar correction1 = Scalar(1) - std::pow(beta1, t);
  const Scalar correction2 = Scalar(1) - std::pow(beta2, t);

  for (std::size_t k = 0; k < slots.size(); ++k) {
    auto& s = slots[k];
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = s.grad.array();
    m = beta1 * m + (Scalar(1) - beta1) * g;
    v = beta2 * v + (Scalar(1) - beta2) * g.square();
    const Scalar lambda = s.decay ? static_cast<Scalar>(config.weight_decay) : Scalar(0);
    s.value.array() -= lr * ((m / correction1) / ((v / correction2).sqrt() + eps) +
                             lambda * s.value.array());
  }
}

}  // namespace morallens
