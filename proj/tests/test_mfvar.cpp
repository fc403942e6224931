#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mfcausal/mfvar.hpp"

using namespace mfcausal;
using Catch::Approx;

namespace {

// Direct simulation of a stacked VAR(1) y_t = c + A y_{t-1} + e_t.
StackedSeries simulate_stacked(const Eigen::MatrixXd& A, const Eigen::VectorXd& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto d = A.rows();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
  StackedSeries s;
  s.ratio = static_cast<std::size_t>(d - 1);
  s.fs = 1.0;
  s.rows.resize(static_cast<Eigen::Index>(n), d);
  for (std::size_t t = 0; t < n + 200; ++t) {
    Eigen::VectorXd e(d);
    for (Eigen::Index i = 0; i < d; ++i) e(i) = g(rng);
    y = c + A * y + e;
    if (t >= 200) s.rows.row(static_cast<Eigen::Index>(t - 200)) = y.transpose();
  }
  return s;
}

Eigen::MatrixXd example_A() {
  Eigen::MatrixXd A(3, 3);
  A << 0.4, 0.1, 0.0,
       0.0, 0.3, 0.0,
       0.5, -0.3, 0.2;
  return A;
}

}  // namespace

TEST_CASE("stacking places each HF block beside its LF sample", "[mfvar]") {
  std::vector<double> h(14);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = static_cast<double>(i);
  const TimeSeries hf(h, 4.0), lf({100.0, 101.0, 102.0}, 1.0, 0.5);
  const auto s = stack(hf, lf, 4);
  REQUIRE(s.dim() == 5);
  REQUIRE(s.length() == 3);
  Eigen::MatrixXd want(3, 5);
  want << 2, 3, 4, 5, 100,
          6, 7, 8, 9, 101,
          10, 11, 12, 13, 102;
  REQUIRE(s.rows == want);
  REQUIRE_THROWS_AS(stack(TimeSeries(h, 4.0), TimeSeries({1.0, 2.0}, 1.0, 0.5), 4), InvalidArgument);
  REQUIRE_THROWS_AS(stack(hf, TimeSeries({1.0, 2.0, 3.0}, 2.0, 0.5), 4), InvalidArgument);
}

TEST_CASE("unstack inverts stack", "[mfvar]") {
  const auto h = testutil::white(60, 1);
  const auto l = testutil::white(20, 2);
  const auto s = stack(TimeSeries(h, 30.0), TimeSeries(l, 10.0), 3);
  const auto [h2, l2] = unstack(s);
  REQUIRE(h2 == h);
  REQUIRE(l2 == l);
}

TEST_CASE("stacked VAR fit recovers known coefficients", "[mfvar]") {
  const auto A = example_A();
  Eigen::VectorXd c(3);
  c << 0.5, -1.0, 0.2;
  const auto s = simulate_stacked(A, c, 20000, 4);
  const auto fit = fit_stacked_var({s}, 1);
  REQUIRE(fit.model.order() == 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    REQUIRE(fit.intercept(i) == Approx(c(i)).margin(0.05));
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double se = fit.std_error(1, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      REQUIRE(std::abs(fit.model.A[0](i, j) - A(i, j)) < 5.0 * se);
    }
  }
  REQUIRE((fit.sigma - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("standard errors of a white-noise fit scale as 1/sqrt(N)", "[mfvar]") {
  const auto s = simulate_stacked(Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(3), 10000, 8);
  const auto fit = fit_stacked_var({s}, 1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(fit.std_error(1, i, j) == Approx(0.01).epsilon(0.05));
}

TEST_CASE("pooled fit equals OLS on the concatenated per-trial design", "[mfvar]") {
  const auto A = example_A();
  const auto a = simulate_stacked(A, Eigen::VectorXd::Zero(3), 400, 1);
  const auto b = simulate_stacked(A, Eigen::VectorXd::Zero(3), 300, 2);
  const auto fit = fit_stacked_var({a, b}, 2);
  // Reference via normal equations over hand-built rows; rows never span
  // the boundary between trials.
  Eigen::MatrixXd X(398 + 298, 7), Y(398 + 298, 3);
  Eigen::Index row = 0;
  for (const auto* s : {&a, &b})
    for (Eigen::Index t = 2; t < s->rows.rows(); ++t, ++row) {
      X(row, 0) = 1.0;
      X.block(row, 1, 1, 3) = s->rows.row(t - 1);
      X.block(row, 4, 1, 3) = s->rows.row(t - 2);
      Y.row(row) = s->rows.row(t);
    }
  const Eigen::MatrixXd B = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  REQUIRE((fit.B - B).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(fit.n_rows == 696);

  // Duplicating a trial scales the normal equations but not the solution.
  const auto one = fit_stacked_var({a}, 1);
  const auto two = fit_stacked_var({a, a}, 1);
  REQUIRE((one.B - two.B).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit rejects short or degenerate data", "[mfvar]") {
  const auto s = simulate_stacked(example_A(), Eigen::VectorXd::Zero(3), 30, 3);
  REQUIRE_THROWS_AS(fit_stacked_var({s}, 1), InvalidArgument);
  auto flat = simulate_stacked(example_A(), Eigen::VectorXd::Zero(3), 500, 3);
  flat.rows.col(1) = flat.rows.col(0);
  REQUIRE_THROWS_AS(fit_stacked_var({flat}, 1), NumericalFailure);
}

TEST_CASE("Wald test finds the coupled direction only", "[mfvar]") {
  // A(2, 0..1) couples HF into LF; the LF column feeds nothing back.
  const auto s = simulate_stacked(example_A(), Eigen::VectorXd::Zero(3), 3000, 9);
  const auto fit = fit_stacked_var({s}, 1);
  const auto to_lf = mfvar_gc_test(fit, FlowDirection::hf_to_lf);
  const auto to_hf = mfvar_gc_test(fit, FlowDirection::lf_to_hf);
  REQUIRE(to_lf.df == 2.0);
  REQUIRE(to_lf.p < 1e-10);
  REQUIRE(to_hf.p > 1e-3);
  const auto f = mfvar_gc_test(fit, FlowDirection::hf_to_lf, true);
  REQUIRE(f.statistic == Approx(to_lf.statistic / 2.0).epsilon(1e-12));
  REQUIRE(f.f_variant);
}

TEST_CASE("Wald statistic is invariant to rescaling either frequency", "[mfvar]") {
  const auto s = simulate_stacked(example_A(), Eigen::VectorXd::Zero(3), 2000, 10);
  auto scaled = s;
  scaled.rows.leftCols(2) *= 37.0;
  scaled.rows.col(2) *= 0.01;
  for (std::size_t r : {1u, 2u})
    for (auto dir : {FlowDirection::hf_to_lf, FlowDirection::lf_to_hf}) {
      const auto a = mfvar_gc_test(fit_stacked_var({s}, r), dir);
      const auto b = mfvar_gc_test(fit_stacked_var({scaled}, r), dir);
      REQUIRE(b.statistic == Approx(a.statistic).epsilon(1e-8));
    }
}

TEST_CASE("MFPair overload stacks every trial", "[mfvar]") {
  std::vector<TimeSeries> hs, ls;
  for (std::uint64_t t = 0; t < 3; ++t) {
    hs.emplace_back(testutil::white(1000, t), 50.0);
    ls.emplace_back(testutil::white(200, 10 + t), 10.0);
  }
  const MFPair pair{MultiTrialSeries(hs), MultiTrialSeries(ls)};
  const auto w = mfvar_gc_test(pair, FlowDirection::hf_to_lf, 1);
  REQUIRE(w.df == 5.0);
  REQUIRE(w.p > 1e-3);
  REQUIRE(stack(pair).size() == 3);
}

TEST_CASE("log-log slope of a power law", "[mfvar]") {
  std::vector<double> x{2, 4, 8, 16}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  REQUIRE(loglog_slope(x, y) == Approx(1.5).epsilon(1e-12));
  REQUIRE_THROWS_AS(loglog_slope({1.0}, {1.0}), InvalidArgument);
}

TEST_CASE("benchmark reports every method and count", "[mfvar]") {
  BenchmarkConfig cfg;
  cfg.methods = {"mfvar"};
  cfg.trial_counts = {1, 8};
  cfg.hf_samples = 1000;
  cfg.repeats = 1;
  const auto rep = benchmark(cfg);
  REQUIRE(rep.seconds.at("mfvar").size() == 2);
  REQUIRE(rep.lf_samples == 200);
  REQUIRE(std::isfinite(rep.slope.at("mfvar")));
  cfg.trial_counts = {2, 4};
  REQUIRE_THROWS_AS(benchmark(cfg), InvalidArgument);
}
