#pragma once

// The immorality head: Dropout -> Linear -> Tanh -> Dropout -> Projection,
// producing one logit per input embedding. Columns are examples throughout,
// so a batch is a d_in x B matrix.

#include "morallens/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

namespace morallens {

struct HeadConfig {
  Eigen::Index d_in = 512;
  Eigen::Index d_hidden = 512;
  double dropout_p = 0.5;

  void validate() const {
    if (d_in < 1 || d_hidden < 1) {
      throw Error(Errc::invalid_argument, "head dimensions must be >= 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
      throw Error(Errc::invalid_argument, "dropout probability must be in [0, 1)");
    }
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

template <typename Scalar>
struct ClassifierHead {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  HeadConfig config;
  Matrix w1;  // d_hidden x d_in
  Vector b1;  // d_hidden
  Vector w2;  // d_hidden (projection weights)
  Scalar b2 = Scalar(0);

  static ClassifierHead zeros(const HeadConfig& config) {
    config.validate();
    ClassifierHead h;
    h.config = config;
    h.w1 = Matrix::Zero(config.d_hidden, config.d_in);
    h.b1 = Vector::Zero(config.d_hidden);
    h.w2 = Vector::Zero(config.d_hidden);
    return h;
  }

  /// Weights uniform in +-1/sqrt(fan_in), biases zero. Draws W1 in
  /// column-major order, then w2.
  template <typename Rng>
  static ClassifierHead initialized(const HeadConfig& config, Rng& rng) {
    auto h = zeros(config);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(config.d_in));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(config.d_hidden));
    for (Eigen::Index k = 0; k < h.w1.size(); ++k) {
      h.w1.data()[k] = static_cast<Scalar>((2.0 * unit_uniform(rng) - 1.0) * bound1);
    }
    for (Eigen::Index k = 0; k < h.w2.size(); ++k) {
      h.w2[k] = static_cast<Scalar>((2.0 * unit_uniform(rng) - 1.0) * bound2);
    }
    return h;
  }

  template <typename Other>
  ClassifierHead<Other> cast() const {
    ClassifierHead<Other> out;
    out.config = config;
    out.w1 = w1.template cast<Other>();
    out.b1 = b1.template cast<Other>();
    out.w2 = w2.template cast<Other>();
    out.b2 = static_cast<Other>(b2);
    return out;
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2);
  }

  /// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
  template <typename Rng>
  static double unit_uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
};

/// Gradients have the same layout as the head parameters.
template <typename Scalar>
struct HeadGradients {
  typename ClassifierHead<Scalar>::Matrix w1;
  typename ClassifierHead<Scalar>::Vector b1;
  typename ClassifierHead<Scalar>::Vector w2;
  Scalar b2 = Scalar(0);

  Scalar max_abs() const {
    return std::max({w1.cwiseAbs().maxCoeff(), b1.cwiseAbs().maxCoeff(), w2.cwiseAbs().maxCoeff(),
                     std::abs(b2)});
  }
};

/// Keep flags (0 or 1) for both dropout sites, one column per example, plus
/// the inverted-dropout scale 1/(1-p). Evaluation masks keep everything with
/// scale 1.
template <typename Scalar>
struct DropoutMask {
  using Matrix = typename ClassifierHead<Scalar>::Matrix;

  Matrix input_keep;   // d_in x B
  Matrix hidden_keep;  // d_hidden x B
  Scalar scale = Scalar(1);

  Eigen::Index batch() const noexcept { return input_keep.cols(); }

  static DropoutMask identity(const HeadConfig& config, Eigen::Index batch) {
    return {Matrix::Ones(config.d_in, batch), Matrix::Ones(config.d_hidden, batch), Scalar(1)};
  }

  /// Draws example by example: d_in input flags, then d_hidden hidden flags.
  /// A unit is kept when its uniform draw is >= p.
  template <typename Rng>
  static DropoutMask sample(const HeadConfig& config, Eigen::Index batch, Rng& rng) {
    if (config.dropout_p == 0.0) return identity(config, batch);
    DropoutMask m{Matrix(config.d_in, batch), Matrix(config.d_hidden, batch),
                  static_cast<Scalar>(1.0 / (1.0 - config.dropout_p))};
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index i = 0; i < config.d_in; ++i) {
        m.input_keep(i, b) = ClassifierHead<Scalar>::unit_uniform(rng) >= config.dropout_p ? 1 : 0;
      }
      for (Eigen::Index i = 0; i < config.d_hidden; ++i) {
        m.hidden_keep(i, b) = ClassifierHead<Scalar>::unit_uniform(rng) >= config.dropout_p ? 1 : 0;
      }
    }
    return m;
  }
};

/// Activations retained by the forward pass for the backward pass.
template <typename Scalar>
struct ForwardCache {
  using Matrix = typename ClassifierHead<Scalar>::Matrix;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Matrix input;          // masked and scaled input
  Matrix hidden;         // tanh(W1 input + b1)
  Matrix hidden_masked;  // masked and scaled hidden
  RowVector logits;      // 1 x B
};

namespace detail {

template <typename Scalar, typename Derived>
void check_input(const ClassifierHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != head.config.d_in) {
    throw Error(Errc::dimension_mismatch, "input has dimension " + std::to_string(x.rows()) +
                                              ", head expects " + std::to_string(head.config.d_in));
  }
  if (!x.allFinite()) throw Error(Errc::non_finite, "input embedding is not finite");
}

}  // namespace detail

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Batched forward pass. `inputs` is d_in x B, `mask` must have B columns.
template <typename Scalar, typename Derived>
ForwardCache<Scalar> forward(const ClassifierHead<Scalar>& head,
                             const Eigen::MatrixBase<Derived>& inputs,
                             const DropoutMask<Scalar>& mask) {
  detail::check_input(head, inputs);
  if (mask.batch() != inputs.cols() || mask.input_keep.rows() != head.config.d_in ||
      mask.hidden_keep.rows() != head.config.d_hidden || mask.hidden_keep.cols() != inputs.cols()) {
    throw Error(Errc::dimension_mismatch, "dropout mask does not match the batch shape");
  }
  ForwardCache<Scalar> c;
  c.input = (inputs.template cast<Scalar>().array() * mask.input_keep.array() * mask.scale).matrix();
  c.hidden = ((head.w1 * c.input).colwise() + head.b1).array().tanh().matrix();
  c.hidden_masked = (c.hidden.array() * mask.hidden_keep.array() * mask.scale).matrix();
  c.logits = (head.w2.transpose() * c.hidden_masked).array() + head.b2;
  return c;
}

/// Evaluation-mode logits (dropout is the identity), 1 x B.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> logits(const ClassifierHead<Scalar>& head,
                                                const Eigen::MatrixBase<Derived>& inputs) {
  detail::check_input(head, inputs);
  typename ClassifierHead<Scalar>::Matrix hidden =
      ((head.w1 * inputs.template cast<Scalar>()).colwise() + head.b1).array().tanh().matrix();
  return (head.w2.transpose() * hidden).array() + head.b2;
}

/// Probability bounds so that a probability is always strictly inside (0, 1)
/// even where sigmoid rounds to 0 or 1.
template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  return std::clamp(p, lo, hi);
}

template <typename Scalar, typename Derived>
Scalar predict_proba(const ClassifierHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != 1) throw Error(Errc::dimension_mismatch, "predict_proba takes one column");
  return clamp_probability(sigmoid(logits(head, x)(0)));
}

/// Mean binary cross-entropy on logits in the stable form
/// max(z,0) - z*y + log(1 + exp(-|z|)).
template <typename DerivedZ, typename DerivedY>
typename DerivedZ::Scalar bce_with_logits(const Eigen::DenseBase<DerivedZ>& z,
                                          const Eigen::DenseBase<DerivedY>& y) {
  using Scalar = typename DerivedZ::Scalar;
  if (z.size() == 0) throw Error(Errc::empty_input, "bce_with_logits: empty batch");
  if (z.size() != y.size()) throw Error(Errc::dimension_mismatch, "bce_with_logits: size mismatch");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const Scalar zi = z.derived().coeff(i);
    const auto yi = static_cast<Scalar>(y.derived().coeff(i));
    if (yi != Scalar(0) && yi != Scalar(1)) {
      throw Error(Errc::invalid_argument, "bce_with_logits: target is not 0 or 1");
    }
    total += std::max(zi, Scalar(0)) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
  }
  return total / static_cast<Scalar>(z.size());
}

/// Gradient of the mean loss over the batch held in `cache`.
template <typename Scalar, typename DerivedY>
HeadGradients<Scalar> backward(const ClassifierHead<Scalar>& head, const ForwardCache<Scalar>& cache,
                               const Eigen::DenseBase<DerivedY>& targets,
                               const DropoutMask<Scalar>& mask) {
  const Eigen::Index batch = cache.logits.size();
  if (batch == 0) throw Error(Errc::empty_input, "backward: empty batch");
  if (targets.size() != batch) throw Error(Errc::dimension_mismatch, "backward: target count mismatch");

  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dz(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    dz(b) = (sigmoid(cache.logits(b)) - static_cast<Scalar>(targets.derived().coeff(b))) /
            static_cast<Scalar>(batch);
  }

  HeadGradients<Scalar> g;
  g.b2 = dz.sum();
  g.w2 = cache.hidden_masked * dz.transpose();
  typename ClassifierHead<Scalar>::Matrix d_pre =
      ((head.w2 * dz).array() * mask.hidden_keep.array() * mask.scale *
       (Scalar(1) - cache.hidden.array().square()))
          .matrix();
  g.w1 = d_pre * cache.input.transpose();
  g.b1 = d_pre.rowwise().sum();
  return g;
}

/// Convenience: forward + backward on a batch, returning the loss too.
template <typename Scalar, typename DerivedX, typename DerivedY>
std::pair<Scalar, HeadGradients<Scalar>> loss_and_gradients(
    const ClassifierHead<Scalar>& head, const Eigen::MatrixBase<DerivedX>& inputs,
    const Eigen::DenseBase<DerivedY>& targets, const DropoutMask<Scalar>& mask) {
  auto cache = forward(head, inputs, mask);
  const Scalar loss = bce_with_logits(cache.logits, targets);
  return {loss, backward(head, cache, targets, mask)};
}

}  // namespace morallens
