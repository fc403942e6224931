#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "mfcausal/simulators.hpp"
#include "mfcausal/vargc.hpp"

using namespace mfcausal;
using Catch::Approx;

namespace {

// Roots in z of 1 - sum a_k z^k via the companion of the reversed polynomial.
std::vector<std::complex<double>> ar_roots(const std::vector<double>& a) {
  const auto p = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index k = 0; k < p; ++k) C(0, k) = a[static_cast<std::size_t>(k)];
  for (Eigen::Index k = 1; k < p; ++k) C(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(C);
  std::vector<std::complex<double>> poles;
  for (Eigen::Index i = 0; i < p; ++i) poles.push_back(es.eigenvalues()(i));
  return poles;
}

bool has_pole(const std::vector<std::complex<double>>& poles, double r, double f, double fs) {
  const auto want = std::polar(r, 2.0 * std::numbers::pi * f / fs);
  for (const auto& z : poles)
    if (std::abs(z - want) < 1e-9) return true;
  return false;
}

}  // namespace

TEST_CASE("oscillator polynomials have the requested poles", "[vargc]") {
  const auto one = oscillator_coeffs({{0.9, 10.0}}, 100.0);
  REQUIRE(one.size() == 2);
  REQUIRE(has_pole(ar_roots(one), 0.9, 10.0, 100.0));
  const auto two = oscillator_coeffs({{0.9, 80.0}, {0.8, 4.0}}, 200.0);
  REQUIRE(two.size() == 4);
  const auto poles = ar_roots(two);
  REQUIRE(has_pole(poles, 0.9, 80.0, 200.0));
  REQUIRE(has_pole(poles, 0.8, 4.0, 200.0));
  REQUIRE_THROWS_AS(oscillator_coeffs({{1.0, 10.0}}, 100.0), InvalidArgument);
}

TEST_CASE("stability margin of simple models", "[vargc]") {
  auto m = VARModel::zeros(1, 1, 10.0);
  m.A[0](0, 0) = 0.5;
  const auto s = check_stability(m);
  REQUIRE(s.stable);
  REQUIRE(s.min_root_modulus == Approx(2.0));
  m.A[0](0, 0) = 1.02;
  REQUIRE_FALSE(check_stability(m).stable);
  REQUIRE_THROWS_AS(simulate_var(m, 100, 1, 100, 1), InvalidArgument);
}

TEST_CASE("every built-in VAR system is stable", "[vargc][simulators]") {
  REQUIRE(check_stability(make_unidirectional_var4(Coupling::x_to_y)).stable);
  REQUIRE(check_stability(make_unidirectional_var4(Coupling::y_to_x)).stable);
  REQUIRE(check_stability(make_bidirectional_var41()).stable);
  for (auto k : {TrivariateKind::chain, TrivariateKind::parallel, TrivariateKind::stokes_var3})
    REQUIRE(check_stability(make_trivariate(k)).stable);
}

TEST_CASE("simulated AR(1) matches its theoretical moments", "[vargc]") {
  auto m = VARModel::zeros(1, 1, 1.0);
  m.A[0](0, 0) = 0.7;
  const auto d = simulate_var(m, 50000, 2, 100, 42);
  REQUIRE(d.size() == 1);
  REQUIRE(d[0].n_trials() == 2);
  const auto& x = d[0][0].values();
  REQUIRE(variance_of(x) == Approx(1.0 / (1.0 - 0.49)).epsilon(0.05));
  std::vector<double> a(x.begin() + 1, x.end()), b(x.begin(), x.end() - 1);
  REQUIRE(testutil::corr(a, b) == Approx(0.7).margin(0.02));
  // Deterministic per seed, and trials differ.
  REQUIRE(simulate_var(m, 100, 2, 100, 42)[0][1].values() == simulate_var(m, 100, 2, 100, 42)[0][1].values());
  REQUIRE(d[0][0].values() != d[0][1].values());
  // Thread count does not change the draw.
  REQUIRE(simulate_var(m, 100, 3, 100, 9, 1)[0][2].values() == simulate_var(m, 100, 3, 100, 9, 3)[0][2].values());
}

TEST_CASE("coupling tables of the built-in systems", "[simulators]") {
  const auto x2y = make_unidirectional_var4(Coupling::x_to_y);
  REQUIRE(x2y.order() == 4);
  REQUIRE(x2y.fs == 200.0);
  REQUIRE(x2y.A[0](1, 0) == -0.4);
  REQUIRE(x2y.A[1](1, 0) == 0.7);
  REQUIRE(x2y.A[2](1, 0) == -0.1);
  for (const auto& a : x2y.A) REQUIRE(a(0, 1) == 0.0);
  REQUIRE(has_pole(ar_roots({x2y.A[0](0, 0), x2y.A[1](0, 0), x2y.A[2](0, 0), x2y.A[3](0, 0)}), 0.9, 80.0, 200.0));

  const auto y2x = make_unidirectional_var4(Coupling::y_to_x);
  REQUIRE(y2x.A[0](0, 1) == 0.05);
  REQUIRE(y2x.A[1](0, 1) == -0.05);
  REQUIRE(y2x.A[2](0, 1) == 0.1);
  for (const auto& a : y2x.A) REQUIRE(a(1, 0) == 0.0);

  const auto bi = make_bidirectional_var41();
  REQUIRE(bi.order() == 41);
  REQUIRE(bi.A[21](1, 0) == 0.35);
  double taps = 0.0;
  for (std::size_t i = 30; i <= 40; ++i) taps += std::abs(bi.A[i](0, 1));
  REQUIRE(taps > 0.0);

  const auto chain = make_trivariate(TrivariateKind::chain);
  REQUIRE(chain.A[1](1, 0) == 1.5);
  REQUIRE(chain.A[1](2, 1) == 0.4);
  for (const auto& a : chain.A) REQUIRE(a(2, 0) == 0.0);
  const auto par = make_trivariate(TrivariateKind::parallel);
  for (const auto& a : par.A) REQUIRE(a(1, 0) == 0.0);
  const auto st = make_trivariate(TrivariateKind::stokes_var3);
  REQUIRE(st.fs == 120.0);
  REQUIRE(st.order() == 3);
}

TEST_CASE("spectral GC vanishes without coupling and is one-sided with it", "[vargc]") {
  auto m = make_unidirectional_var4(Coupling::x_to_y);
  const auto grid = default_sgc_grid(m.fs, 64);
  REQUIRE(grid.back() == Approx(100.0));
  const auto g = spectral_gc_analytic(m, grid);
  double xy = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    REQUIRE(g.gc_yx[i] < 1e-12);
    xy = std::max(xy, g.gc_xy[i]);
  }
  REQUIRE(xy > 0.1);
  for (auto& a : m.A) a(1, 0) = 0.0;
  const auto none = spectral_gc_analytic(m, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) REQUIRE(none.gc_xy[i] < 1e-12);
}

TEST_CASE("spectral GC of a VAR(1) matches a hand-derived value", "[vargc]") {
  // x_t = e_x, y_t = b x_{t-1} + e_y with unit noises: S_yy = b^2 + 1 at
  // every frequency and the X-driven part is b^2, so GC = ln(1 + b^2).
  auto m = VARModel::zeros(2, 1, 1.0);
  m.A[0](1, 0) = 0.6;
  const auto g = spectral_gc_analytic(m, {0.1, 0.25, 0.5});
  for (double v : g.gc_xy) REQUIRE(v == Approx(std::log(1.36)).epsilon(1e-12));
}

TEST_CASE("time-domain GC detects the driven direction", "[vargc]") {
  const auto d = simulate_var(make_unidirectional_var4(Coupling::x_to_y), 4000, 4, 1000, 5);
  const auto xy = time_domain_gc(d, 0, 1, {}, 4);
  const auto yx = time_domain_gc(d, 1, 0, {}, 4);
  REQUIRE(xy.p < 1e-6);
  REQUIRE(yx.p > 1e-3);
  REQUIRE(xy.gc > yx.gc);
  REQUIRE(xy.df1 == 4.0);
  REQUIRE_THROWS_AS(time_domain_gc(d, 0, 0, {}, 4), InvalidArgument);
}

TEST_CASE("conditional GC separates chain from direct links", "[vargc]") {
  const auto d = simulate_var(make_trivariate(TrivariateKind::chain), 4000, 3, 1000, 6);
  const auto direct = time_domain_gc(d, 0, 2, {1}, 4);
  const auto hop = time_domain_gc(d, 1, 2, {0}, 4);
  REQUIRE(hop.p < 1e-6);
  REQUIRE(direct.p > 1e-3);
}

TEST_CASE("logistic map stays in the unit interval and is seeded", "[simulators]") {
  LogisticParams p;
  const auto [x, y] = simulate_logistic(p, 2000, 3);
  REQUIRE(x.size() == 2000);
  REQUIRE(x.fs() == 200.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    REQUIRE(x[i] > 0.0);
    REQUIRE(x[i] < 1.0);
    REQUIRE(y[i] > 0.0);
    REQUIRE(y[i] < 1.0);
  }
  // Recurrence check against the defining map.
  for (std::size_t t = 0; t + 1 < 50; ++t) {
    REQUIRE(x[t + 1] == Approx(x[t] * (p.r_x - p.r_x * x[t] - p.gamma_xy * y[t])).epsilon(1e-14));
    REQUIRE(y[t + 1] == Approx(y[t] * (p.r_y - p.r_y * y[t] - p.gamma_yx * x[t])).epsilon(1e-14));
  }
  REQUIRE(simulate_logistic(p, 100, 3).first.values() == simulate_logistic(p, 100, 3).first.values());
  LogisticParams bad;
  bad.r_x = 4.5;
  bad.max_retries = 3;
  REQUIRE_THROWS_AS(simulate_logistic(bad, 500, 1), SimulationFailure);
}

TEST_CASE("uncoupled Lorenz output does not depend on the Rossler system", "[simulators]") {
  RosslerLorenzParams a;
  a.C = 0.0;
  a.duration = 2.0;
  a.transient = 1.0;
  RosslerLorenzParams b = a;
  b.alpha = 10.0;
  const auto ra = simulate_rossler_lorenz(a, 7), rb = simulate_rossler_lorenz(b, 7);
  REQUIRE(ra.size() == 6);
  for (std::size_t c = 3; c < 6; ++c) REQUIRE(ra[c].values() == rb[c].values());
  REQUIRE(ra[0].values() != rb[0].values());
  RosslerLorenzParams off = a;
  off.include_rossler = false;
  const auto ro = simulate_rossler_lorenz(off, 7);
  for (double v : ro[0].values()) REQUIRE(v == 0.0);
}

TEST_CASE("Rossler-Lorenz integration is bounded and step-converged", "[simulators]") {
  RosslerLorenzParams p;
  p.duration = 1.0;
  p.transient = 0.0;
  const auto coarse = simulate_rossler_lorenz(p, 11);
  p.dt = 5e-4;
  const auto fine = simulate_rossler_lorenz(p, 11);
  for (std::size_t c = 0; c < 6; ++c) {
    REQUIRE(coarse[c].size() == 100);
    for (std::size_t k = 0; k < coarse[c].size(); ++k) {
      REQUIRE(std::abs(coarse[c][k]) < 100.0);
      REQUIRE(coarse[c][k] == Approx(fine[c][k]).margin(1e-4));
    }
  }
  p.dt = 0.02;
  REQUIRE_THROWS_AS(simulate_rossler_lorenz(p, 1), InvalidArgument);
}

TEST_CASE("modulators are memoryless and match their formulas", "[simulators]") {
  const TimeSeries x0(testutil::white(400, 2), 200.0, 0.5);
  const auto pac = pac_modulate(x0);
  double lo = 0.0;
  for (double v : x0.values()) lo = std::min(lo, v);
  for (std::size_t k = 0; k < x0.size(); k += 37)
    REQUIRE(pac[k] == Approx((x0[k] - lo) * std::sin(2.0 * std::numbers::pi * 90.0 * x0.time_at(k))).margin(1e-12));

  AmplitudeModParams sig;
  const auto s = amplitude_modulate(x0, sig);
  const double tc = 0.5 + 1.0;  // t0 + duration / 2
  for (std::size_t k = 0; k < x0.size(); k += 41)
    REQUIRE(s[k] == Approx(x0[k] / (1.0 + std::exp(-(x0.time_at(k) - tc)))).margin(1e-12));

  AmplitudeModParams per;
  per.kind = AmplitudeModParams::Kind::periodic;
  const auto q = amplitude_modulate(x0, per);
  for (std::size_t k = 0; k < x0.size(); k += 43) {
    const double g = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 0.2 * x0.time_at(k));
    REQUIRE(q[k] == Approx(x0[k] * g).margin(1e-12));
  }
  // Memoryless: changing one input sample changes only that output sample.
  auto bumped = x0.values();
  bumped[200] += 1.0;
  const auto s2 = amplitude_modulate(x0.with_samples(bumped), sig);
  for (std::size_t k = 0; k < x0.size(); ++k)
    if (k != 200) REQUIRE(s2[k] == s[k]);
}

TEST_CASE("named systems expose the documented channels", "[simulators]") {
  for (const auto& name : system_names()) {
    const auto sys = simulate_system(name, 2, name == "rossler-lorenz" ? 3.0 : 4.0, 1);
    REQUIRE_FALSE(sys.channels.empty());
    for (const auto& [label, ch] : sys.channels) {
      REQUIRE(ch.n_trials() == 2);
      if (label.size() > 3 && label.substr(label.size() - 3) == "_lf") {
        const auto& full = sys.channel(label.substr(0, label.size() - 3));
        REQUIRE(full.fs() / ch.fs() == Approx(name == "stokes3" ? 3.0 : 5.0));
      }
    }
  }
  const auto uni = simulate_system("uni-x2y", 2, 2.0, 4);
  REQUIRE(uni.channel("X").length() == 400);
  REQUIRE(uni.channel("Y_lf").length() == 80);
  REQUIRE_THROWS_AS(uni.channel("Z"), InvalidArgument);
  REQUIRE_THROWS_AS(simulate_system("nope", 1, 1.0, 1), InvalidArgument);
  const auto again = simulate_system("uni-x2y", 2, 2.0, 4);
  REQUIRE(again.channel("X")[1].values() == uni.channel("X")[1].values());
}
