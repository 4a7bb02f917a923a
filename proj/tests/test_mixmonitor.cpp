#include "oracles.hpp"
#include "tpca/error.hpp"
#include "tpca/mixmonitor.hpp"

#include <catch_amalgamated.hpp>

using namespace tpca;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> column(const Eigen::MatrixXd& x, Index c, Index from, Index to) {
  std::vector<double> out;
  for (Index i = from; i < to; ++i) out.push_back(x(i, c));
  return out;
}

Eigen::MatrixXd correlated_rows(Index rows, const Eigen::MatrixXd& cov, Rng& rng) {
  return sample_normal_rows(rows, Eigen::VectorXd::Zero(cov.rows()), covariance_factor(cov), rng);
}

Eigen::MatrixXd equicorrelated(Index d, double rho) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(d, d, rho);
  r.diagonal().setOnes();
  return r;
}

}  // namespace

TEST_CASE("lag extension") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  const Eigen::MatrixXd e = lag_extend_rows(x, 1);
  REQUIRE(e.rows() == 3);
  REQUIRE(e.cols() == 4);
  CHECK(e.row(0) == Eigen::RowVector4d(1, 2, 3, 4));
  CHECK(e.row(2) == Eigen::RowVector4d(5, 6, 7, 8));
  CHECK(lag_extend_rows(x, 0) == x);
  CHECK(lag_extend(x.topRows(2)) == Eigen::Vector4d(1, 2, 3, 4));
  try {
    lag_extend_rows(x, 4);
    FAIL("expected InsufficientHistory");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientHistory);
  }
}

TEST_CASE("Bartlett correction") {
  for (Index m : {2, 10, 100, 1000})
    for (Index t : {2, 5, 50, 400})
      for (Index k = 0; k <= t - 2; k += std::max<Index>(1, t / 7))
        CHECK_THAT(bartlett_correction(m, k, t), WithinRel(oracle::bartlett(m, k, t), 1e-10));
  // Approaches 1 when every segment is long.
  CHECK_THAT(bartlett_correction(100000, 50000, 100000), WithinAbs(1.0, 1e-4));
  CHECK(bartlett_correction(10, 3, 5) > 1.0);
  CHECK_THROWS_AS(bartlett_correction(10, 4, 5), Error);
  CHECK_THROWS_AS(bartlett_correction(1, 0, 2), Error);
}

TEST_CASE("stream llr") {
  Rng rng = make_rng(3);
  std::normal_distribution<double> n01(0.0, 1.0);
  SECTION("agrees with the two-pass oracle") {
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> a(5 + rep % 40), b(2 + rep % 17);
      for (double& v : a) v = 3.0 + n01(rng);
      for (double& v : b) v = 3.5 + 2.0 * n01(rng);
      const double got = stream_llr(segment_sums(a), segment_sums(b));
      REQUIRE_THAT(got, WithinAbs(oracle::llr(a, b), 1e-9 * std::max(1.0, std::abs(got))));
      REQUIRE(got >= -1e-12);
    }
  }
  SECTION("constant segments clamp and count, or throw") {
    const std::vector<double> a{1.0, 2.0, 3.0}, b{5.0, 5.0};
    int clamped = 0;
    const double v = stream_llr(segment_sums(a), segment_sums(b), kVarFloor, &clamped);
    CHECK(std::isfinite(v));
    CHECK(clamped == 1);
    try {
      stream_llr(segment_sums(a), segment_sums(b));
      FAIL("expected DegenerateSegment");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateSegment);
    }
  }
  SECTION("corrected statistic has null mean 2") {
    // 2 free parameters (mean and variance of the post-change segment).
    const Index m = 40, k = 20, t = 30;
    const double c = bartlett_correction(m, k, t);
    double acc = 0.0;
    const int reps = 40000;
    for (int r = 0; r < reps; ++r) {
      std::vector<double> a(static_cast<std::size_t>(m + k)), b(static_cast<std::size_t>(t - k));
      for (double& v : a) v = n01(rng);
      for (double& v : b) v = n01(rng);
      acc += 2.0 * stream_llr(segment_sums(a), segment_sums(b)) / c;
    }
    CHECK_THAT(acc / reps, WithinAbs(2.0, 0.04));
  }
}

TEST_CASE("mixture term") {
  for (double p0 : {0.01, 0.1, 0.5, 0.9})
    for (double x : {-30.0, -2.0, -1e-6, 0.0, 1e-6, 0.5, 3.0, 20.0})
      CHECK_THAT(mixture_term(x, p0),
                 WithinAbs(std::log(1.0 - p0 + p0 * std::exp(x)), 1e-12));
  CHECK(mixture_term(5.0, 1.0) == 5.0);
  // No overflow for huge llrs: log(p0) + x.
  CHECK_THAT(mixture_term(1e6, 0.1), WithinRel(1e6 + std::log(0.1), 1e-15));
  CHECK(std::isfinite(mixture_term(-1e6, 0.1)));
  double prev = -1e300;
  for (double x = -10.0; x <= 10.0; x += 0.01) {
    const double v = mixture_term(x, 0.3);
    REQUIRE(v > prev);
    prev = v;
  }
  const std::vector<double> llrs{1.0, 2.0, 0.25};
  const double expected = std::log(0.8 + 0.2 * std::exp(0.5)) + std::log(0.8 + 0.2 * std::exp(1.0)) +
                          std::log(0.8 + 0.2 * std::exp(0.125));
  CHECK_THAT(mixture_statistic(llrs, 2.0, 0.2), WithinAbs(expected, 1e-14));
}

TEST_CASE("projection monitor standardizes the training set") {
  Rng rng = make_rng(4);
  const Eigen::MatrixXd train = correlated_rows(300, equicorrelated(5, 0.6), rng);
  MonitorOptions opts;
  const MonitorModel model = make_projection_monitor(train, {0, 2, 4}, opts);
  Eigen::MatrixXd z(train.rows(), 3);
  for (Index i = 0; i < train.rows(); ++i) z.row(i) = project_observation(model, train.row(i).transpose());
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd c = z.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(z.rows());
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((cov - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  for (Index j = 0; j < 3; ++j) {
    CHECK_THAT(model.training[static_cast<std::size_t>(j)].variance(), WithinAbs(1.0, 1e-9));
    CHECK(model.training[static_cast<std::size_t>(j)].count == 300.0);
  }
  CHECK_THROWS_AS(make_projection_monitor(train, {5}, opts), Error);
  CHECK_THROWS_AS(project_observation(model, Eigen::VectorXd::Zero(4)), Error);
}

TEST_CASE("monitor recursion") {
  Rng rng = make_rng(5);
  const Eigen::MatrixXd train = correlated_rows(60, equicorrelated(3, 0.3), rng);
  Eigen::MatrixXd stream = correlated_rows(90, equicorrelated(3, 0.3), rng);
  stream.bottomRows(40).col(1).array() += 1.5;

  SECTION("p0 = 1 raw monitor equals the naive sum-of-streams GLR") {
    MonitorOptions opts;
    opts.window = 25;
    const MonitorModel model = make_raw_monitor(train, opts);
    const RunResult run = run_monitor(model, stream, false);
    REQUIRE(run.trace.size() == 90);
    CHECK(run.trace[0].stat == kNoStatistic);
    CHECK(run.trace[0].argmax_k == -1);
    for (Index t = 2; t <= 90; ++t) {
      const double naive = oracle::sum_of_streams_glr(train, stream, t, 25);
      const double got = run.trace[static_cast<std::size_t>(t - 1)].stat;
      REQUIRE_THAT(got, WithinAbs(naive, 1e-9 * std::max(1.0, std::abs(naive))));
    }
  }
  SECTION("window bounds and operation count") {
    MonitorOptions opts;
    opts.window = 10;
    opts.p0 = 0.2;
    Monitor mon(make_raw_monitor(train, opts));
    std::uint64_t expected = 0;
    for (Index t = 1; t <= 40; ++t) {
      const auto step = mon.push(stream.row(t - 1).transpose());
      REQUIRE(step);
      const Index k_min = std::max<Index>(0, t - 11);
      const Index ks = std::max<Index>(0, t - 1 - k_min);  // k in [k_min, t - 2]
      expected += static_cast<std::uint64_t>(3 * ks);
      REQUIRE(mon.llr_evaluations() == expected);
      if (t >= 2) {
        REQUIRE(step->argmax_k >= k_min);
        REQUIRE(step->argmax_k <= t - 2);
        // The streamed maximum matches a recompute from the stored window.
        double best = kNoStatistic;
        for (Index k = k_min; k <= t - 2; ++k) {
          const double c = bartlett_correction(60, k, t);
          double lam = 0.0;
          for (Index d = 0; d < 3; ++d) lam += mixture_term(stream_llr(mon.stream(d), k) / c, 0.2);
          best = std::max(best, lam);
        }
        REQUIRE_THAT(step->stat, WithinAbs(best, 1e-9));
      }
    }
    CHECK(mon.stream(0).buffered() == 11);
    CHECK_THROWS_AS(mon.stream(0).back(11), Error);
  }
  SECTION("infinite threshold never alarms") {
    const RunResult run = run_monitor(make_raw_monitor(train, MonitorOptions{}), stream);
    CHECK(!run.stopping_time);
    CHECK(run.trace.size() == 90);
  }
}

TEST_CASE("monitor detects and warns") {
  Rng rng = make_rng(6);
  const Eigen::MatrixXd train = correlated_rows(100, equicorrelated(4, 0.5), rng);
  MonitorOptions opts;
  opts.threshold = 20.0;
  const MonitorModel model = make_projection_monitor(train, {3}, opts);

  SECTION("a large shift on the monitored axis alarms quickly") {
    Eigen::MatrixXd stream = correlated_rows(200, equicorrelated(4, 0.5), rng);
    const Eigen::VectorXd dir = model.projection.weights.col(0).normalized();
    for (Index i = 50; i < 200; ++i) stream.row(i) += 5.0 * dir.transpose() * std::sqrt(0.5);
    const RunResult run = run_monitor(model, stream);
    REQUIRE(run.stopping_time);
    CHECK(*run.stopping_time > 50);
    CHECK(*run.stopping_time <= 60);
    CHECK(run.trace.back().alarm);
  }
  SECTION("constant post-change segment is clamped with warnings") {
    Eigen::MatrixXd stream = Eigen::MatrixXd::Zero(5, 4);
    MonitorOptions o;
    const RunResult run = run_monitor(make_projection_monitor(train, {3}, o), stream);
    CHECK(run.trace.back().warnings > 0);
    CHECK(std::isfinite(run.trace.back().stat));
  }
}

TEST_CASE("lagged monitor warm-up") {
  Rng rng = make_rng(7);
  const Eigen::MatrixXd train = correlated_rows(80, equicorrelated(2, 0.4), rng);
  MonitorOptions opts;
  opts.lag = 2;
  const MonitorModel model = make_raw_monitor(train, opts);
  CHECK(model.extended_dim() == 6);
  CHECK(model.training_count == 78);
  Monitor mon(model);
  const Eigen::MatrixXd stream = correlated_rows(6, equicorrelated(2, 0.4), rng);
  CHECK(!mon.push(stream.row(0).transpose()));
  CHECK(!mon.push(stream.row(1).transpose()));
  const auto first = mon.push(stream.row(2).transpose());
  REQUIRE(first);
  CHECK(first->t == 1);
  const auto second = mon.push(stream.row(3).transpose());
  REQUIRE(second);
  CHECK(second->t == 2);
  CHECK(std::isfinite(second->stat));
  CHECK_THROWS_AS(mon.push(Eigen::VectorXd::Zero(6)), Error);
}
