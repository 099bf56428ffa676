#include "morallens/classifier_head.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace morallens;

namespace {

ClassifierHead<double> unit_head() {
  auto h = ClassifierHead<double>::zeros({1, 1, 0.0});
  h.w1(0, 0) = 1.0;
  h.w2(0) = 1.0;
  return h;
}

ClassifierHead<double> random_head(Eigen::Index d_in, Eigen::Index d_hidden, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto h = ClassifierHead<double>::zeros({d_in, d_hidden, 0.0});
  for (Eigen::Index k = 0; k < h.w1.size(); ++k) h.w1.data()[k] = u(rng);
  for (Eigen::Index k = 0; k < d_hidden; ++k) {
    h.b1(k) = u(rng);
    h.w2(k) = u(rng);
  }
  h.b2 = u(rng);
  return h;
}

oracle::NaiveHead to_naive(const ClassifierHead<double>& h) {
  oracle::NaiveHead n;
  n.d_in = static_cast<int>(h.config.d_in);
  n.d_hidden = static_cast<int>(h.config.d_hidden);
  for (Eigen::Index i = 0; i < h.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.w1.cols(); ++j) n.w1.push_back(h.w1(i, j));
  }
  n.b1.assign(h.b1.data(), h.b1.data() + h.b1.size());
  n.w2.assign(h.w2.data(), h.w2.data() + h.w2.size());
  n.b2 = h.b2;
  return n;
}

std::vector<double> flatten(const HeadGradients<double>& g) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < g.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.w1.cols(); ++j) out.push_back(g.w1(i, j));
  }
  out.insert(out.end(), g.b1.data(), g.b1.data() + g.b1.size());
  out.insert(out.end(), g.w2.data(), g.w2.data() + g.w2.size());
  out.push_back(g.b2);
  return out;
}

}  // namespace

TEST_CASE("forward: zero head gives logit 0") {
  const auto head = ClassifierHead<double>::zeros({4, 3, 0.5});
  const Eigen::Vector4d x(1.0, -2.0, 3.0, 0.5);
  const auto cache = forward(head, x, DropoutMask<double>::identity(head.config, 1));
  CHECK(cache.logits(0) == 0.0);
}

TEST_CASE("forward: unit head evaluates tanh") {
  const auto head = unit_head();
  const auto id = DropoutMask<double>::identity(head.config, 1);
  CHECK(forward(head, Eigen::VectorXd::Constant(1, 0.0), id).logits(0) == 0.0);
  // mpmath: tanh(1) = 0.76159415595576488811945828260479...
  CHECK(forward(head, Eigen::VectorXd::Constant(1, 1.0), id).logits(0) ==
        doctest::Approx(0.7615941559557649).epsilon(1e-15));
}

TEST_CASE("forward: rejects bad input") {
  const auto head = ClassifierHead<double>::zeros({3, 2, 0.0});
  const auto id = DropoutMask<double>::identity(head.config, 1);
  CHECK_THROWS_AS(forward(head, Eigen::Vector2d(1, 2), id), Error);
  Eigen::Vector3d bad(1, std::nan(""), 0);
  try {
    forward(head, bad, id);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite);
  }
}

TEST_CASE("predict_proba") {
  const auto zero = ClassifierHead<double>::zeros({2, 2, 0.5});
  CHECK(predict_proba(zero, Eigen::Vector2d(3, -1)) == 0.5);

  auto h = ClassifierHead<double>::zeros({1, 1, 0.0});
  h.b2 = std::log(3.0);
  CHECK(predict_proba(h, Eigen::VectorXd::Constant(1, 0.7)) == doctest::Approx(0.75).epsilon(1e-15));

  SUBCASE("strictly inside (0, 1) for extreme logits") {
    for (double b : {-1e4, -800.0, -40.0, 40.0, 800.0, 1e4}) {
      h.b2 = b;
      const double p = predict_proba(h, Eigen::VectorXd::Constant(1, 0.0));
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("evaluation mode is bit-identical across calls") {
  std::mt19937_64 rng(3);
  const auto head = random_head(6, 5, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  const auto id = DropoutMask<double>::identity(head.config, 1);
  const double a = forward(head, x, id).logits(0);
  const double b = forward(head, x, id).logits(0);
  const double c = logits(head, x)(0);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  CHECK(std::memcmp(&a, &c, sizeof a) == 0);
}

TEST_CASE("bce_with_logits") {
  using V = Eigen::VectorXd;
  CHECK(bce_with_logits(V::Constant(1, 0.0), V::Constant(1, 1.0)) == doctest::Approx(std::log(2.0)));
  CHECK(bce_with_logits(V::Zero(2), Eigen::Vector2d(0, 1)) == doctest::Approx(std::log(2.0)));

  // mpmath: log1p(exp(-100)) = 3.72007597602083596e-44, 100 + that = 100.
  const double high = bce_with_logits(V::Constant(1, 100.0), V::Constant(1, 1.0));
  CHECK(high == doctest::Approx(3.720075976020836e-44).epsilon(1e-12));
  CHECK(bce_with_logits(V::Constant(1, -100.0), V::Constant(1, 1.0)) == doctest::Approx(100.0).epsilon(1e-15));

  SUBCASE("finite and non-negative up to |z| = 1e4") {
    for (double z : {-1e4, -50.0, -1.0, 0.0, 1.0, 50.0, 1e4}) {
      for (double y : {0.0, 1.0}) {
        const double l = bce_with_logits(V::Constant(1, z), V::Constant(1, y));
        CHECK(std::isfinite(l));
        CHECK(l >= 0.0);
      }
    }
  }

  CHECK_THROWS_AS(bce_with_logits(V(0), V(0)), Error);
  CHECK_THROWS_AS(bce_with_logits(V::Zero(1), V::Constant(1, 0.5)), Error);
}

TEST_CASE("backward: zero head, target 1") {
  const auto head = ClassifierHead<double>::zeros({3, 2, 0.0});
  const auto mask = DropoutMask<double>::identity(head.config, 1);
  const auto [loss, g] = loss_and_gradients(head, Eigen::Vector3d(0.3, -1, 2), Eigen::VectorXd::Ones(1), mask);
  CHECK(g.b2 == doctest::Approx(-0.5));
  CHECK(g.w1.isZero());
  CHECK(g.w2.isZero());
}

TEST_CASE("backward: duplicated example equals single example") {
  std::mt19937_64 rng(11);
  const auto head = random_head(5, 4, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
  Eigen::MatrixXd twice(5, 2);
  twice << x, x;
  const auto single = loss_and_gradients(head, x, Eigen::VectorXd::Ones(1),
                                         DropoutMask<double>::identity(head.config, 1)).second;
  const auto doubled = loss_and_gradients(head, twice, Eigen::VectorXd::Ones(2),
                                          DropoutMask<double>::identity(head.config, 2)).second;
  CHECK((single.w1 - doubled.w1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((single.w2 - doubled.w2).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(single.b2 - doubled.b2) < 1e-15);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(2024);
  const auto head = random_head(5, 4, rng);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::vector<double>> xs(3, std::vector<double>(5));
  Eigen::MatrixXd x(5, 3);
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 5; ++i) x(i, b) = xs[b][i] = u(rng);
  }
  const std::vector<int> ys = {1, 0, 1};
  const Eigen::Vector3d y(1, 0, 1);

  const auto analytic = flatten(
      loss_and_gradients(head, x, y, DropoutMask<double>::identity(head.config, 3)).second);
  auto naive = to_naive(head);
  const auto numeric = naive.central_differences(xs, ys, 1e-4L);
  REQUIRE(analytic.size() == numeric.size());
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    CHECK(std::abs(analytic[k] - numeric[k]) / std::max(1.0, std::abs(analytic[k])) < 1e-4);
  }
}

TEST_CASE("backward with dropout routes gradient only through kept units") {
  std::mt19937_64 rng(5);
  auto head = random_head(4, 3, rng);
  head.config.dropout_p = 0.5;
  auto mask = DropoutMask<double>::identity(head.config, 1);
  mask.scale = 2.0;
  mask.input_keep(1, 0) = 0;
  mask.hidden_keep(2, 0) = 0;
  const auto [loss, g] = loss_and_gradients(head, Eigen::Vector4d(0.5, 1, -1, 2), Eigen::VectorXd::Ones(1), mask);
  CHECK(g.w1.col(1).isZero());
  CHECK(g.w2(2) == 0.0);
  CHECK(g.w1.row(2).isZero());
  CHECK(g.b1(2) == 0.0);
}

TEST_CASE("inverted dropout preserves the input in expectation") {
  const HeadConfig config{8, 4, 0.5};
  std::mt19937_64 rng(77);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, -2.0, 3.0);
  constexpr int kDraws = 20000;
  const auto masks = DropoutMask<double>::sample(config, kDraws, rng);
  const Eigen::MatrixXd scaled = (masks.input_keep.array().colwise() * x.array()) * masks.scale;
  const Eigen::VectorXd mean = scaled.rowwise().mean();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    // Each draw is 0 or 2x with probability 1/2: sd = |x|.
    const double stderr_i = std::abs(x(i)) / std::sqrt(static_cast<double>(kDraws));
    CHECK(std::abs(mean(i) - x(i)) <= 3.0 * stderr_i + 1e-12);
  }
}

TEST_CASE("dropout mask: p = 0 is the identity and draws nothing") {
  std::mt19937_64 a(9);
  const auto identity = DropoutMask<double>::sample({3, 2, 0.0}, 4, a);
  CHECK(identity.input_keep.isOnes());
  CHECK(identity.hidden_keep.isOnes());
  CHECK(identity.scale == 1.0);

  std::mt19937_64 fresh(9);
  const auto m1 = DropoutMask<double>::sample({3, 2, 0.5}, 4, a);
  const auto m2 = DropoutMask<double>::sample({3, 2, 0.5}, 4, fresh);
  CHECK(m1.input_keep == m2.input_keep);
  CHECK(m1.hidden_keep == m2.hidden_keep);
  CHECK(m1.scale == 2.0);

  std::mt19937_64 other(10);
  CHECK(DropoutMask<double>::sample({3, 2, 0.5}, 4, other).input_keep != m1.input_keep);
}

TEST_CASE("initialization bounds and seeding") {
  std::mt19937_64 rng1(42), rng2(42);
  const HeadConfig config{16, 8, 0.5};
  const auto h1 = ClassifierHead<double>::initialized(config, rng1);
  const auto h2 = ClassifierHead<double>::initialized(config, rng2);
  CHECK(h1.w1 == h2.w1);
  CHECK(h1.w1.cwiseAbs().maxCoeff() <= 1.0 / 4.0);
  CHECK(h1.w2.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(h1.b1.isZero());
  CHECK(h1.b2 == 0.0);
}

TEST_CASE("head config validation") {
  CHECK_THROWS_AS(ClassifierHead<double>::zeros({0, 3, 0.5}), Error);
  CHECK_THROWS_AS(ClassifierHead<double>::zeros({3, 3, 1.0}), Error);
  CHECK_THROWS_AS(ClassifierHead<double>::zeros({3, 3, -0.1}), Error);
}
