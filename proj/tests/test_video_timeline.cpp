#include "morallens/video_timeline.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <random>

using namespace morallens;

TEST_CASE("percentile frame index") {
  CHECK(select_percentile_frame(1) == 0);
  CHECK(select_percentile_frame(100) == 74);
  CHECK(select_percentile_frame(5) == 3);
  CHECK(select_percentile_frame(150) == 111);  // 30 fps, 5 s
  CHECK_THROWS_AS(select_percentile_frame(0), Error);

  std::uint64_t previous = 0;
  for (std::uint64_t n = 1; n < 2000; ++n) {
    const auto idx = select_percentile_frame(n);
    CHECK(idx >= previous);
    CHECK(idx < n);
    CHECK(idx == static_cast<std::uint64_t>(std::floor(0.75 * static_cast<double>(n - 1))));
    previous = idx;
  }
}

TEST_CASE("window-5 quadratic weights match the closed form") {
  const auto w = savgol_weights(5, 2, 2);
  for (int j = -2; j <= 2; ++j) {
    CHECK(std::abs(w(j + 2) - oracle::savgol_quadratic_weight(2, j)) < 1e-14);
  }
  CHECK(std::abs(w(2) - 17.0 / 35.0) < 1e-14);
  const auto w7 = savgol_weights(7, 3, 3);
  for (int j = -3; j <= 3; ++j) {
    CHECK(std::abs(w7(j + 3) - oracle::savgol_quadratic_weight(3, j)) < 1e-13);
  }
}

TEST_CASE("savgol_smooth") {
  SUBCASE("constants are unchanged") {
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(11, 0.42);
    CHECK((savgol_smooth(c) - c).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("quadratics are reproduced") {
    Eigen::VectorXd q(9);
    for (int i = 0; i < 9; ++i) q(i) = i * i;
    const auto s = savgol_smooth(q);
    for (int i = 0; i < 9; ++i) CHECK(std::abs(s(i) - q(i)) < 1e-9);  // edges too: the shifted fit is exact
  }
  SUBCASE("unit impulse") {
    Eigen::VectorXd impulse = Eigen::VectorXd::Zero(5);
    impulse(2) = 1;
    CHECK(std::abs(savgol_smooth(impulse)(2) - 17.0 / 35.0) < 1e-12);

    Eigen::VectorXd long_impulse = Eigen::VectorXd::Zero(9);
    long_impulse(4) = 1;
    const auto s = savgol_smooth(long_impulse);
    CHECK(s(3) == doctest::Approx(12.0 / 35.0));
    CHECK(s(2) == doctest::Approx(-3.0 / 35.0));
    CHECK(s(0) == doctest::Approx(3.0 / 35.0));  // edge fit evaluated two steps off-center
  }
  SUBCASE("series shorter than the window is fit once") {
    const Eigen::Vector3d three(0.2, 0.9, 0.4);
    // Three points, degree 2: the fit interpolates.
    CHECK((savgol_smooth(three) - three).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 0.3);
    CHECK(savgol_smooth(one)(0) == doctest::Approx(0.3));
    // Degree 1 over 3 points: the least-squares line.
    const auto line = savgol_smooth(three, 5, 1);
    CHECK(line(1) == doctest::Approx(0.5));
  }
  SUBCASE("linear fit keeps lines") {
    Eigen::VectorXd line(8);
    for (int i = 0; i < 8; ++i) line(i) = 0.1 * i - 0.3;
    CHECK((savgol_smooth(line, 5, 1) - line).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("precondition errors") {
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(6);
    CHECK_THROWS_AS(savgol_smooth(v, 4, 2), Error);
    CHECK_THROWS_AS(savgol_smooth(v, 5, 5), Error);
    CHECK_THROWS_AS(savgol_smooth(Eigen::VectorXd(0)), Error);
  }
}

TEST_CASE("build_timeline") {
  const std::vector<double> t1 = {0.0};
  const std::vector<double> p1 = {0.63};
  const auto single = build_timeline("one", t1, p1);
  CHECK(single.mean == 0.63);
  CHECK(single.samples.at(0).p_smooth == doctest::Approx(0.63));
  CHECK(single.verdict == 0);

  const std::vector<double> t3 = {0, 1, 2};
  const std::vector<double> p3 = {0.8, 0.8, 0.8};
  CHECK(build_timeline("c", t3, p3).verdict == 1);

  const std::vector<double> t4 = {0, 1, 2, 3};
  const std::vector<double> p4 = {0.9, 0.1, 0.9, 0.1};
  const auto alt = build_timeline("a", t4, p4);
  CHECK(alt.mean == doctest::Approx(0.5));
  CHECK(alt.verdict == 0);

  SUBCASE("boundary mean 0.7 counts as violent unless strict") {
    const std::vector<double> p = {0.7, 0.7, 0.7, 0.7};
    CHECK(build_timeline("b", t4, p).mean == 0.7);
    CHECK(build_timeline("b", t4, p).verdict == 1);
    TimelineOptions strict;
    strict.strict = true;
    CHECK(build_timeline("b", t4, p, strict).verdict == 0);
  }

  SUBCASE("errors") {
    const std::vector<double> empty;
    CHECK_THROWS_AS(build_timeline("e", empty, empty), Error);
    const std::vector<double> bad_t = {0, 2, 1};
    CHECK_THROWS_AS(build_timeline("e", bad_t, p3), Error);
    const std::vector<double> dup_t = {0, 1, 1};
    CHECK_THROWS_AS(build_timeline("e", dup_t, p3), Error);
  }
}

TEST_CASE("smoothing never changes the verdict") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<double> t(static_cast<std::size_t>(n));
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      t[i] = i;
      p[i] = u(rng);
    }
    const auto base = build_timeline("r", t, p);
    for (auto [w, o] : {std::pair{3, 1}, std::pair{7, 3}, std::pair{9, 0}}) {
      TimelineOptions opt;
      opt.window = w;
      opt.poly_order = o;
      const auto other = build_timeline("r", t, p, opt);
      CHECK(other.verdict == base.verdict);
      CHECK(other.mean == base.mean);
    }
  }
}

TEST_CASE("score_timeline runs the head on each frame") {
  auto head = ClassifierHead<double>::zeros({2, 2, 0.0});
  std::vector<TimedFrame> frames(3);
  for (int i = 0; i < 3; ++i) {
    frames[i].t = i;
    frames[i].record.vector = Eigen::Vector2f(0.5f, -0.5f);
  }
  const auto tl = score_timeline(head, "zero", std::span<const TimedFrame>(frames));
  CHECK(tl.mean == 0.5);
  CHECK(tl.verdict == 0);

  head.b2 = 2.0;  // sigmoid(2) ~ 0.881
  CHECK(score_timeline(head, "hot", std::span<const TimedFrame>(frames)).verdict == 1);
  CHECK_THROWS_AS(score_timeline(head, "none", std::span<const TimedFrame>()), Error);
}

TEST_CASE("timeline serialization") {
  const std::vector<double> t = {0, 1};
  const std::vector<double> p = {0.8, 0.9};
  const auto tl = build_timeline("clip", t, p);
  const auto j = nlohmann::json::parse(to_json(tl));
  CHECK(j["clip_id"] == "clip");
  CHECK(j["verdict"] == 1);
  CHECK(j["samples"].size() == 2);
  CHECK(j["samples"][1]["p_raw"] == 0.9);
  CHECK(to_csv(tl).rfind("clip_id,t,p_raw,p_smooth\n", 0) == 0);
}
