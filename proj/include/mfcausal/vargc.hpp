#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "mfcausal/core.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal {

/// theta_t = sum_tau A[tau-1] theta_{t-tau} + e_t, e_t ~ N(0, sigma).
struct VARModel {
  std::vector<Eigen::MatrixXd> A;
  Eigen::MatrixXd sigma;
  double fs = 1.0;

  VARModel() = default;
  VARModel(std::vector<Eigen::MatrixXd> coeffs, Eigen::MatrixXd noise, double rate)
      : A(std::move(coeffs)), sigma(std::move(noise)), fs(rate) {
    validate();
  }
  /// Zero coefficients of order r, identity noise.
  static VARModel zeros(std::size_t n, std::size_t r, double rate) {
    return {std::vector<Eigen::MatrixXd>(r, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))),
            Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), rate};
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma.rows()); }
  std::size_t order() const noexcept { return A.size(); }

  void validate() const {
    require(!A.empty(), "VAR order must be at least 1");
    require(fs > 0.0, "VAR sampling rate must be positive");
    const auto n = sigma.rows();
    require(n >= 1 && sigma.cols() == n, "noise covariance must be square");
    for (const auto& a : A) require(a.rows() == n && a.cols() == n, "coefficient matrices must be n x n");
    require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff()),
            "noise covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    require(llt.info() == Eigen::Success, "noise covariance must be positive definite");
  }
};

inline Eigen::MatrixXd companion(const VARModel& m) {
  const auto n = static_cast<Eigen::Index>(m.dim());
  const auto r = static_cast<Eigen::Index>(m.order());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n * r, n * r);
  for (Eigen::Index t = 0; t < r; ++t) C.block(0, t * n, n, n) = m.A[static_cast<std::size_t>(t)];
  if (r > 1) C.block(n, 0, n * (r - 1), n * (r - 1)).setIdentity();
  return C;
}

struct StabilityReport {
  bool stable = false;
  double min_root_modulus = 0.0;  ///< smallest |z| with det(I - sum A z^tau) = 0
  double margin = 0.0;            ///< min_root_modulus - 1
};

/// Roots of the reverse characteristic polynomial are reciprocals of the
/// companion-matrix eigenvalues.
inline StabilityReport check_stability(const VARModel& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion(m), false);
  if (es.info() != Eigen::Success) throw NumericalFailure("companion eigenvalues failed to converge");
  const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  StabilityReport s;
  s.min_root_modulus = rho > 0.0 ? 1.0 / rho : std::numeric_limits<double>::infinity();
  s.margin = s.min_root_modulus - 1.0;
  s.stable = s.margin > 0.0;
  return s;
}

/// Channel-major output: result[c] holds every trial of channel c.
inline std::vector<MultiTrialSeries> simulate_var(const VARModel& m, std::size_t n_samples, std::size_t n_trials,
                                                  std::size_t burn_in, std::uint64_t seed, unsigned threads = 1) {
  m.validate();
  const auto st = check_stability(m);
  if (!st.stable)
    throw InvalidArgument("VAR model is unstable (stability margin " + std::to_string(st.margin) + ")");
  require(burn_in >= 10 * m.order(), "burn-in must be at least 10 times the VAR order");
  require(n_samples >= 1 && n_trials >= 1, "need at least one sample and one trial");
  const auto n = static_cast<Eigen::Index>(m.dim());
  const std::size_t r = m.order();
  const Eigen::MatrixXd L = m.sigma.llt().matrixL();

  std::vector<std::vector<std::vector<double>>> data(m.dim(), std::vector<std::vector<double>>(n_trials));
  parallel_for(n_trials, threads, [&](std::size_t trial) {
    std::mt19937_64 rng(derive_seed(seed, 0x7661725f73696dULL, trial));
    std::normal_distribution<double> normal;
    const std::size_t total = n_samples + burn_in;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(total));
    Eigen::VectorXd e(n);
    for (std::size_t t = 0; t < total; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) e(i) = normal(rng);
      Eigen::VectorXd acc = L * e;
      for (std::size_t tau = 1; tau <= std::min(r, t); ++tau)
        acc.noalias() += m.A[tau - 1] * x.col(static_cast<Eigen::Index>(t - tau));
      x.col(static_cast<Eigen::Index>(t)) = acc;
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      auto& dst = data[static_cast<std::size_t>(c)][trial];
      dst.resize(n_samples);
      for (std::size_t t = 0; t < n_samples; ++t) dst[t] = x(c, static_cast<Eigen::Index>(t + burn_in));
    }
  });
  std::vector<MultiTrialSeries> out;
  for (auto& ch : data) {
    std::vector<TimeSeries> trials;
    for (auto& tr : ch) trials.emplace_back(std::move(tr), m.fs);
    out.emplace_back(std::move(trials));
  }
  return out;
}

struct Oscillator {
  double r = 0.0;  ///< pole modulus in (0, 1)
  double f = 0.0;  ///< Hz
};

/// AR polynomial of one or two damped resonators at sampling rate fs:
/// coefficients a_1.. of x_t = sum a_k x_{t-k}, the product of
/// (1 - 2 r cos(theta) z + r^2 z^2) factors.
inline std::vector<double> oscillator_coeffs(const std::vector<Oscillator>& osc, double fs) {
  require(osc.size() == 1 || osc.size() == 2, "oscillator spec needs one or two (r, f) pairs");
  for (const auto& o : osc) {
    require(o.r > 0.0 && o.r < 1.0, "oscillator modulus must lie in (0, 1)");
    require(o.f >= 0.0 && o.f < 0.5 * fs, "oscillator frequency must lie below fs/2");
  }
  const double c1 = std::cos(2.0 * std::numbers::pi * osc[0].f / fs), r1 = osc[0].r;
  if (osc.size() == 1) return {2.0 * r1 * c1, -r1 * r1};
  const double c2 = std::cos(2.0 * std::numbers::pi * osc[1].f / fs), r2 = osc[1].r;
  return {2.0 * r1 * c1 + 2.0 * r2 * c2, -r1 * r1 - r2 * r2 - 4.0 * r1 * r2 * c1 * c2,
          2.0 * r1 * r2 * (r2 * c1 + r1 * c2), -r1 * r1 * r2 * r2};
}

struct GCResult {
  double gc = 0.0;  ///< ln(RSS_reduced / RSS_full)
  double F = 0.0;
  double p = 1.0;
  double df1 = 0.0, df2 = 0.0;
};

/// Conditional Granger causality source -> target by pooled least squares
/// over trials. Both regressions include an intercept, the target's own
/// history and the conditioning histories; the full model adds the source's.
inline GCResult time_domain_gc(const std::vector<MultiTrialSeries>& channels, std::size_t source, std::size_t target,
                               const std::vector<std::size_t>& conditioning, std::size_t order) {
  require(order >= 1, "GC order must be >= 1");
  require(source < channels.size() && target < channels.size(), "channel index out of range");
  require(source != target, "source and target must differ");
  for (auto c : conditioning) {
    require(c < channels.size(), "conditioning channel out of range");
    require(c != source && c != target, "conditioning set must exclude source and target");
  }
  const std::size_t n_trials = channels[target].n_trials();
  const std::size_t len = channels[target].length();
  for (const auto& ch : channels)
    require(ch.n_trials() == n_trials && ch.length() == len, "channels must share trial layout");
  require(len > order, "trials shorter than the model order");

  std::vector<std::size_t> reduced{target};
  reduced.insert(reduced.end(), conditioning.begin(), conditioning.end());
  const auto k_red = static_cast<Eigen::Index>(1 + reduced.size() * order);
  const auto k_full = k_red + static_cast<Eigen::Index>(order);
  const auto rows = static_cast<Eigen::Index>(n_trials * (len - order));
  require(rows >= 20 * k_full, "not enough samples for the number of GC parameters");

  Eigen::MatrixXd X(rows, k_full);
  Eigen::VectorXd y(rows);
  Eigen::Index row = 0;
  for (std::size_t tr = 0; tr < n_trials; ++tr) {
    for (std::size_t t = order; t < len; ++t, ++row) {
      y(row) = channels[target][tr][t];
      Eigen::Index col = 0;
      X(row, col++) = 1.0;
      for (auto c : reduced)
        for (std::size_t l = 1; l <= order; ++l) X(row, col++) = channels[c][tr][t - l];
      for (std::size_t l = 1; l <= order; ++l) X(row, col++) = channels[source][tr][t - l];
    }
  }
  auto rss = [&](Eigen::Index k) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.leftCols(k));
    if (qr.rank() < k) throw NumericalFailure("rank-deficient GC regression");
    const Eigen::VectorXd beta = qr.solve(y);
    return (y - X.leftCols(k) * beta).squaredNorm();
  };
  const double rss_r = rss(k_red), rss_f = rss(k_full);
  GCResult g;
  g.df1 = static_cast<double>(order);
  g.df2 = static_cast<double>(rows - k_full);
  if (!(rss_f > 0.0)) throw NumericalFailure("GC regression has zero residual");
  g.gc = std::log(rss_r / rss_f);
  g.F = std::max(0.0, (rss_r - rss_f) / g.df1 / (rss_f / g.df2));
  boost::math::fisher_f dist(g.df1, g.df2);
  g.p = boost::math::cdf(boost::math::complement(dist, g.F));
  return g;
}

/// H(f) = (I - sum_tau A_tau exp(-i 2 pi f tau / fs))^-1.
inline Eigen::MatrixXcd transfer_function(const VARModel& m, double f) {
  const auto n = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXcd Af = Eigen::MatrixXcd::Identity(n, n);
  for (std::size_t tau = 1; tau <= m.order(); ++tau)
    Af -= m.A[tau - 1].cast<std::complex<double>>() *
          std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(tau) / m.fs);
  return Af.inverse();
}

inline Eigen::MatrixXcd spectral_density(const VARModel& m, double f) {
  const Eigen::MatrixXcd H = transfer_function(m, f);
  return H * m.sigma.cast<std::complex<double>>() * H.adjoint();
}

struct SGCProfile {
  std::vector<double> freqs;
  std::vector<double> gc_xy;  ///< channel 0 -> channel 1
  std::vector<double> gc_yx;  ///< channel 1 -> channel 0
};

/// n points evenly spaced on (0, fs/2].
inline std::vector<double> default_sgc_grid(double fs, std::size_t n = 512) {
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = 0.5 * fs * static_cast<double>(i + 1) / static_cast<double>(n);
  return f;
}

/// Geweke spectral GC of a bivariate VAR, with the instantaneous noise
/// correlation partialled into the receiving channel.
inline SGCProfile spectral_gc_analytic(const VARModel& m, const std::vector<double>& freqs) {
  m.validate();
  require(m.dim() == 2, "analytic spectral GC needs a bivariate model");
  const auto st = check_stability(m);
  if (!st.stable)
    throw InvalidArgument("VAR model is unstable (stability margin " + std::to_string(st.margin) + ")");
  const double sxx = m.sigma(0, 0), syy = m.sigma(1, 1), sxy = m.sigma(0, 1);
  SGCProfile out;
  out.freqs = freqs;
  for (double f : freqs) {
    const Eigen::MatrixXcd H = transfer_function(m, f);
    const Eigen::MatrixXcd S = H * m.sigma.cast<std::complex<double>>() * H.adjoint();
    const double Sxx = S(0, 0).real(), Syy = S(1, 1).real();
    const double to_y = (sxx - sxy * sxy / syy) * std::norm(H(1, 0));
    const double to_x = (syy - sxy * sxy / sxx) * std::norm(H(0, 1));
    out.gc_xy.push_back(std::max(0.0, std::log(Syy / (Syy - to_y))));
    out.gc_yx.push_back(std::max(0.0, std::log(Sxx / (Sxx - to_x))));
  }
  return out;
}

}  // namespace mfcausal
