#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfcausal/core.hpp"
#include "mfcausal/timeseries.hpp"
#include "mfcausal/vargc.hpp"

namespace mfcausal {

enum class Coupling { x_to_y, y_to_x };
enum class TrivariateKind { chain, chain_lf_intermediate, parallel, stokes_var3 };

namespace detail {

inline void set_diagonal_poly(std::vector<Eigen::MatrixXd>& A, Eigen::Index ch, const std::vector<double>& poly) {
  for (std::size_t k = 0; k < poly.size(); ++k) A[k](ch, ch) = poly[k];
}

}  // namespace detail

/// Bivariate VAR(4) at 200 Hz; X resonates at 80 and 4 Hz, Y at 15 and 2 Hz.
inline VARModel make_unidirectional_var4(Coupling dir) {
  constexpr double fs = 200.0;
  auto m = VARModel::zeros(2, 4, fs);
  detail::set_diagonal_poly(m.A, 0, oscillator_coeffs({{0.9, 80.0}, {0.8, 4.0}}, fs));
  detail::set_diagonal_poly(m.A, 1, oscillator_coeffs({{0.85, 15.0}, {0.7, 2.0}}, fs));
  if (dir == Coupling::x_to_y) {
    m.A[0](1, 0) = -0.4;
    m.A[1](1, 0) = 0.7;
    m.A[2](1, 0) = -0.1;
  } else {
    m.A[0](0, 1) = 0.05;
    m.A[1](0, 1) = -0.05;
    m.A[2](0, 1) = 0.1;
  }
  return m;
}

inline constexpr std::array<double, 11> kBandPassTaps{0.000, 0.001, -0.014, -0.039, 0.026, 0.098,
                                                      0.026, -0.039, -0.014, 0.001, 0.000};

/// Bivariate VAR(41) at 200 Hz: X -> Y through lags 21-23 (0.1 s), Y -> X
/// through a band-pass kernel on lags 31-41 (0.15 s).
inline VARModel make_bidirectional_var41() {
  constexpr double fs = 200.0;
  auto m = VARModel::zeros(2, 41, fs);
  detail::set_diagonal_poly(m.A, 0, oscillator_coeffs({{0.8, 4.0}}, fs));
  detail::set_diagonal_poly(m.A, 1, oscillator_coeffs({{0.9, 15.0}}, fs));
  m.A[20](1, 0) = -0.175;
  m.A[21](1, 0) = 0.35;
  m.A[22](1, 0) = -0.175;
  for (std::size_t i = 0; i < kBandPassTaps.size(); ++i) m.A[30 + i](0, 1) = kBandPassTaps[i];
  return m;
}

/// Trivariate systems. Channel order is [X1, X2, Y] for the chain and
/// parallel systems (the LF-intermediate chain reuses the chain model with
/// X2 playing Y1), and [x1, x2, x3] at 120 Hz for the VAR(3) system.
inline VARModel make_trivariate(TrivariateKind kind) {
  if (kind == TrivariateKind::stokes_var3) {
    constexpr double fs = 120.0;
    auto m = VARModel::zeros(3, 3, fs);
    detail::set_diagonal_poly(m.A, 0, oscillator_coeffs({{0.9, 40.0}}, fs));
    detail::set_diagonal_poly(m.A, 1, oscillator_coeffs({{0.7, 10.0}}, fs));
    detail::set_diagonal_poly(m.A, 2, oscillator_coeffs({{0.8, 50.0}}, fs));
    m.A[0](1, 0) = -0.356;
    m.A[1](1, 0) = 0.7136;
    m.A[2](1, 0) = -0.356;
    m.A[0](2, 1) = -0.3098;
    m.A[1](2, 1) = 0.5;
    m.A[2](2, 1) = -0.3098;
    return m;
  }
  constexpr double fs = 200.0;
  auto m = VARModel::zeros(3, 4, fs);
  detail::set_diagonal_poly(m.A, 0, oscillator_coeffs({{0.95, 80.0}, {0.7, 5.0}}, fs));
  detail::set_diagonal_poly(m.A, 1, oscillator_coeffs({{0.85, 15.0}}, fs));
  detail::set_diagonal_poly(m.A, 2, oscillator_coeffs({{0.85, 10.0}, {0.7, 2.0}}, fs));
  if (kind == TrivariateKind::parallel) {
    m.A[0](2, 0) = -0.4;
    m.A[0](2, 1) = -0.8;
    m.A[1](2, 0) = 0.7;
    m.A[1](2, 1) = 1.5;
    m.A[2](2, 0) = -0.1;
    m.A[2](2, 1) = -1.0;
  } else {
    m.A[0](1, 0) = -0.7;
    m.A[1](1, 0) = 1.5;
    m.A[2](1, 0) = 1.0;
    m.A[0](2, 1) = -0.3;
    m.A[1](2, 1) = 0.4;
    m.A[2](2, 1) = -0.3;
  }
  return m;
}

struct PACParams {
  double f_a = 90.0;
};

/// (x0(t) + |min x0|) * sin(2 pi f_a t).
inline TimeSeries pac_modulate(const TimeSeries& x0, const PACParams& p = {}) {
  require(p.f_a > 0.0 && p.f_a < 0.5 * x0.fs(), "carrier frequency must lie below fs/2");
  double lo = 0.0;
  for (double v : x0.samples()) lo = std::min(lo, v);
  const double offset = std::abs(lo);
  std::vector<double> out(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k)
    out[k] = (x0[k] + offset) * std::sin(2.0 * std::numbers::pi * p.f_a * x0.time_at(k));
  return x0.with_samples(std::move(out));
}

struct AmplitudeModParams {
  enum class Kind { sigmoid, periodic } kind = Kind::sigmoid;
  double slope = 1.0;                 ///< sigmoid k, 1/s
  std::optional<double> center;       ///< sigmoid t_c, s; mid-trial by default
  double mod_freq = 0.2;              ///< periodic f_m, Hz
  double depth = 0.8;                 ///< periodic d in (0, 1]
};

/// Multiplies x0 by a strictly positive gain: a logistic ramp or
/// 1 - d/2 + (d/2) sin(2 pi f_m t).
inline TimeSeries amplitude_modulate(const TimeSeries& x0, const AmplitudeModParams& p = {}) {
  require(std::isfinite(p.slope) && std::isfinite(p.mod_freq), "modulation parameters must be finite");
  require(p.depth > 0.0 && p.depth <= 1.0, "modulation depth must lie in (0, 1]");
  const double tc = p.center.value_or(x0.t0() + 0.5 * x0.duration());
  std::vector<double> out(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double t = x0.time_at(k);
    const double gain = p.kind == AmplitudeModParams::Kind::sigmoid
                            ? 1.0 / (1.0 + std::exp(-p.slope * (t - tc)))
                            : 1.0 - 0.5 * p.depth + 0.5 * p.depth * std::sin(2.0 * std::numbers::pi * p.mod_freq * t);
    out[k] = x0[k] * gain;
  }
  return x0.with_samples(std::move(out));
}

struct LogisticParams {
  double r_x = 3.7;
  double r_y = 3.8;
  double gamma_xy = 0.0;  ///< effect of Y on X
  double gamma_yx = 0.32; ///< effect of X on Y
  std::size_t discard = 100;
  double fs = 200.0;      ///< rate assigned to the map's unit step
  std::size_t max_retries = 100;
};

/// X(t+1) = X(t)[r_x - r_x X(t) - g_xy Y(t)], Y symmetric. Initial values
/// are uniform on [0, 1]; a run that leaves (0, 1) is restarted.
inline std::pair<TimeSeries, TimeSeries> simulate_logistic(const LogisticParams& p, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t attempt = 0; attempt <= p.max_retries; ++attempt) {
    double x = unif(rng), y = unif(rng);
    std::vector<double> xs, ys;
    xs.reserve(n);
    ys.reserve(n);
    bool ok = true;
    for (std::size_t t = 0; t < n + p.discard; ++t) {
      const double xn = x * (p.r_x - p.r_x * x - p.gamma_xy * y);
      const double yn = y * (p.r_y - p.r_y * y - p.gamma_yx * x);
      x = xn;
      y = yn;
      if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) {
        ok = false;
        break;
      }
      if (t >= p.discard) {
        xs.push_back(x);
        ys.push_back(y);
      }
    }
    if (ok) return {TimeSeries(std::move(xs), p.fs), TimeSeries(std::move(ys), p.fs)};
  }
  throw SimulationFailure("logistic map left (0, 1) on every attempt");
}

struct RosslerLorenzParams {
  double alpha = 6.0;
  double C = 2.0;
  double dt = 1e-3;       ///< integrator step, s
  double fs_out = 100.0;
  double duration = 20.0; ///< kept seconds
  double transient = 10.0;
  bool include_rossler = true;
};

/// Rossler system x driving a Lorenz system y through C x2^2, RK4 at a
/// fixed step and sampled at fs_out. Returns x1, x2, x3, y1, y2, y3.
inline std::vector<TimeSeries> simulate_rossler_lorenz(const RosslerLorenzParams& p, std::uint64_t seed) {
  require(p.dt > 0.0 && p.fs_out > 0.0 && p.duration > 0.0 && p.transient >= 0.0, "invalid integration settings");
  require(p.dt <= 1.0 / (10.0 * p.fs_out) + 1e-15, "integrator step must be at most 1/(10 fs_out)");
  const double ratio = 1.0 / (p.fs_out * p.dt);
  const auto sub = static_cast<std::size_t>(std::llround(ratio));
  require(std::abs(ratio - static_cast<double>(sub)) < 1e-6, "1/(fs_out dt) must be an integer");

  using State = std::array<double, 6>;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  State s;
  for (double& v : s) v = unif(rng);
  if (!p.include_rossler) s[0] = s[1] = s[2] = 0.0;

  const auto deriv = [&](const State& u) {
    State d{};
    if (p.include_rossler) {
      d[0] = -p.alpha * (u[1] + u[2]);
      d[1] = p.alpha * (u[0] + 0.2 * u[1]);
      d[2] = p.alpha * (0.2 + u[2] * (u[0] - 5.7));
    }
    d[3] = 10.0 * (-u[3] + u[4]);
    d[4] = 28.0 * u[3] - u[4] - u[3] * u[5] + p.C * u[1] * u[1];
    d[5] = u[3] * u[4] - 8.0 / 3.0 * u[5];
    return d;
  };
  const auto axpy = [](const State& a, double h, const State& b) {
    State r;
    for (std::size_t i = 0; i < 6; ++i) r[i] = a[i] + h * b[i];
    return r;
  };

  const auto n_skip = static_cast<std::size_t>(std::llround(p.transient * p.fs_out));
  const auto n_keep = static_cast<std::size_t>(std::llround(p.duration * p.fs_out));
  std::vector<std::vector<double>> out(6, std::vector<double>());
  for (auto& v : out) v.reserve(n_keep);
  for (std::size_t k = 0; k < n_skip + n_keep; ++k) {
    if (k >= n_skip)
      for (std::size_t i = 0; i < 6; ++i) out[i].push_back(s[i]);
    for (std::size_t step = 0; step < sub; ++step) {
      const State k1 = deriv(s);
      const State k2 = deriv(axpy(s, 0.5 * p.dt, k1));
      const State k3 = deriv(axpy(s, 0.5 * p.dt, k2));
      const State k4 = deriv(axpy(s, p.dt, k3));
      for (std::size_t i = 0; i < 6; ++i) s[i] += p.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    for (double v : s)
      if (!std::isfinite(v) || std::abs(v) > 1e6) throw SimulationFailure("Rossler-Lorenz integration diverged");
  }
  std::vector<TimeSeries> series;
  for (auto& v : out) series.emplace_back(std::move(v), p.fs_out);
  return series;
}

/// Named multi-trial channels produced by one simulated system.
struct SimulatedSystem {
  std::string name;
  std::vector<std::pair<std::string, MultiTrialSeries>> channels;

  const MultiTrialSeries& channel(const std::string& label) const {
    for (const auto& [n, c] : channels)
      if (n == label) return c;
    throw InvalidArgument("no channel named '" + label + "' in system " + name);
  }
};

namespace detail {

inline MultiTrialSeries decimate_all(const MultiTrialSeries& s, std::size_t factor) {
  std::vector<TimeSeries> out;
  for (const auto& t : s) out.push_back(lowpass_decimate(t, factor));
  return MultiTrialSeries(std::move(out));
}

inline MultiTrialSeries map_trials(const MultiTrialSeries& s, const auto& fn) {
  std::vector<TimeSeries> out;
  for (const auto& t : s) out.push_back(fn(t));
  return MultiTrialSeries(std::move(out));
}

}  // namespace detail

inline const std::vector<std::string>& system_names() {
  static const std::vector<std::string> names{
      "uni-x2y", "uni-y2x",        "bidir41",         "chain",       "chain-lf",    "parallel",      "stokes3",
      "pac",     "ampmod-sigmoid", "ampmod-periodic", "logistic-uni", "logistic-bi", "rossler-lorenz"};
  return names;
}

/// Builds a named system with full-rate channels plus "_lf" channels
/// decimated by `factor` (5 by default, 3 for the 120 Hz system).
inline SimulatedSystem simulate_system(const std::string& name, std::size_t n_trials, double seconds,
                                       std::uint64_t seed, unsigned threads = 1) {
  require(n_trials >= 1, "need at least one trial");
  require(seconds > 0.0, "trial duration must be positive");
  SimulatedSystem sys{name, {}};
  auto add = [&](const std::string& label, MultiTrialSeries s) { sys.channels.emplace_back(label, std::move(s)); };
  auto var_run = [&](const VARModel& m) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * m.fs));
    return simulate_var(m, n, n_trials, 1000, seed, threads);
  };

  if (name == "uni-x2y" || name == "uni-y2x") {
    const auto d = var_run(make_unidirectional_var4(name == "uni-x2y" ? Coupling::x_to_y : Coupling::y_to_x));
    add("X", d[0]);
    add("Y", d[1]);
    add("X_lf", detail::decimate_all(d[0], 5));
    add("Y_lf", detail::decimate_all(d[1], 5));
  } else if (name == "bidir41" || name == "pac" || name == "ampmod-sigmoid" || name == "ampmod-periodic") {
    const auto d = var_run(make_bidirectional_var41());
    if (name == "bidir41") {
      add("X", d[0]);
    } else if (name == "pac") {
      add("X", detail::map_trials(d[0], [](const TimeSeries& t) { return pac_modulate(t); }));
      add("X0", d[0]);
    } else {
      AmplitudeModParams p;
      p.kind = name == "ampmod-sigmoid" ? AmplitudeModParams::Kind::sigmoid : AmplitudeModParams::Kind::periodic;
      add("X", detail::map_trials(d[0], [&](const TimeSeries& t) { return amplitude_modulate(t, p); }));
      add("X0", d[0]);
    }
    add("Y", d[1]);
    add("Y_lf", detail::decimate_all(d[1], 5));
  } else if (name == "chain" || name == "parallel") {
    const auto d = var_run(make_trivariate(name == "chain" ? TrivariateKind::chain : TrivariateKind::parallel));
    add("X1", d[0]);
    add("X2", d[1]);
    add("Y", d[2]);
    add("Y_lf", detail::decimate_all(d[2], 5));
  } else if (name == "chain-lf") {
    const auto d = var_run(make_trivariate(TrivariateKind::chain_lf_intermediate));
    add("X", d[0]);
    add("Y1", d[1]);
    add("Y2", d[2]);
    add("Y1_lf", detail::decimate_all(d[1], 5));
    add("Y2_lf", detail::decimate_all(d[2], 5));
  } else if (name == "stokes3") {
    const auto d = var_run(make_trivariate(TrivariateKind::stokes_var3));
    for (std::size_t c = 0; c < 3; ++c) add("x" + std::to_string(c + 1), d[c]);
    for (std::size_t c = 0; c < 3; ++c) add("x" + std::to_string(c + 1) + "_lf", detail::decimate_all(d[c], 3));
  } else if (name == "logistic-uni" || name == "logistic-bi") {
    LogisticParams p;
    if (name == "logistic-bi") {
      p.gamma_xy = 0.02;
      p.gamma_yx = 0.1;
    }
    const auto n = static_cast<std::size_t>(std::llround(seconds * p.fs));
    std::vector<TimeSeries> xs(n_trials), ys(n_trials);
    parallel_for(n_trials, threads, [&](std::size_t t) {
      auto [x, y] = simulate_logistic(p, n, derive_seed(seed, 0x6c6f67ULL, t));
      xs[t] = std::move(x);
      ys[t] = std::move(y);
    });
    const MultiTrialSeries X(std::move(xs)), Y(std::move(ys));
    add("X", X);
    add("Y", Y);
    add("Y_lf", detail::decimate_all(Y, 5));
  } else if (name == "rossler-lorenz") {
    RosslerLorenzParams p;
    p.duration = seconds;
    std::vector<std::vector<TimeSeries>> runs(n_trials);
    parallel_for(n_trials, threads, [&](std::size_t t) {
      runs[t] = simulate_rossler_lorenz(p, derive_seed(seed, 0x726cULL, t));
    });
    const std::array<const char*, 6> labels{"x1", "x2", "x3", "y1", "y2", "y3"};
    for (std::size_t c = 0; c < 6; ++c) {
      std::vector<TimeSeries> tr;
      for (auto& r : runs) tr.push_back(r[c]);
      MultiTrialSeries s(std::move(tr));
      if (c >= 3) {
        add(labels[c], s);
        add(std::string(labels[c]) + "_lf", detail::decimate_all(s, 5));
      } else {
        add(labels[c], std::move(s));
      }
    }
  } else {
    throw InvalidArgument("unknown system '" + name + "'");
  }
  return sys;
}

}  // namespace mfcausal
