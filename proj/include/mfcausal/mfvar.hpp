#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "mfcausal/core.hpp"
#include "mfcausal/pipeline.hpp"
#include "mfcausal/simulators.hpp"
#include "mfcausal/timeseries.hpp"
#include "mfcausal/vargc.hpp"

namespace mfcausal {

/// One trial at the LF rate. Row t is [x_H(t,1), ..., x_H(t,m), x_L(t)].
struct StackedSeries {
  Eigen::MatrixXd rows;
  std::size_t ratio = 0;
  double fs = 1.0;  ///< LF rate

  std::size_t dim() const noexcept { return ratio + 1; }
  std::size_t length() const noexcept { return static_cast<std::size_t>(rows.rows()); }
};

/// Groups the m HF samples starting at each LF sample's grid position with
/// that LF sample. The HF series must end exactly m samples after the last
/// LF sample's position.
inline StackedSeries stack(const TimeSeries& hf, const TimeSeries& lf, std::size_t m) {
  require(m >= 2, "stacking ratio must be >= 2");
  require(lf.size() >= 1, "LF series is empty");
  require(std::abs(hf.fs() - static_cast<double>(m) * lf.fs()) <= 1e-9 * hf.fs(), "HF rate must be m times the LF rate");
  const double off_d = (lf.t0() - hf.t0()) * hf.fs();
  const auto off = static_cast<std::ptrdiff_t>(std::llround(off_d));
  require(std::abs(off_d - static_cast<double>(off)) <= 1e-6 && off >= 0, "LF samples do not fall on the HF grid");
  require(hf.size() == static_cast<std::size_t>(off) + m * lf.size(),
          "HF length must equal offset + m * LF length for stacking");
  StackedSeries s;
  s.ratio = m;
  s.fs = lf.fs();
  const auto n = static_cast<Eigen::Index>(lf.size());
  s.rows.resize(n, static_cast<Eigen::Index>(m + 1));
  for (Eigen::Index t = 0; t < n; ++t) {
    const std::size_t base = static_cast<std::size_t>(off) + static_cast<std::size_t>(t) * m;
    for (std::size_t i = 0; i < m; ++i) s.rows(t, static_cast<Eigen::Index>(i)) = hf[base + i];
    s.rows(t, static_cast<Eigen::Index>(m)) = lf[static_cast<std::size_t>(t)];
  }
  return s;
}

inline std::vector<StackedSeries> stack(const MFPair& pair) {
  std::vector<StackedSeries> out;
  out.reserve(pair.n_trials());
  for (std::size_t t = 0; t < pair.n_trials(); ++t) out.push_back(stack(pair.hf()[t], pair.lf()[t], pair.ratio()));
  return out;
}

/// Inverse of stack: HF samples in order and the LF column.
inline std::pair<std::vector<double>, std::vector<double>> unstack(const StackedSeries& s) {
  std::vector<double> hf, lf;
  hf.reserve(s.length() * s.ratio);
  lf.reserve(s.length());
  for (Eigen::Index t = 0; t < s.rows.rows(); ++t) {
    for (std::size_t i = 0; i < s.ratio; ++i) hf.push_back(s.rows(t, static_cast<Eigen::Index>(i)));
    lf.push_back(s.rows(t, static_cast<Eigen::Index>(s.ratio)));
  }
  return {std::move(hf), std::move(lf)};
}

struct StackedFit {
  VARModel model;
  Eigen::VectorXd intercept;
  Eigen::MatrixXd B;        ///< (1 + d r) x d, one column per equation
  Eigen::MatrixXd xtx_inv;  ///< (X'X)^-1 of the pooled design
  Eigen::MatrixXd sigma;    ///< residual covariance, (N - k) normalization
  std::size_t n_rows = 0;

  /// Standard error of lag-tau coefficient of variable j in equation i.
  double std_error(std::size_t tau, std::size_t i, std::size_t j) const {
    const auto d = static_cast<Eigen::Index>(sigma.rows());
    const Eigen::Index row = 1 + static_cast<Eigen::Index>(tau - 1) * d + static_cast<Eigen::Index>(j);
    return std::sqrt(sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * xtx_inv(row, row));
  }
};

namespace detail {

/// Pooled lagged design: per-trial rows t = r..n-1 with [1, y_{t-1}, ..., y_{t-r}].
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> stacked_design(const std::vector<StackedSeries>& data,
                                                                  std::size_t r) {
  const auto d = static_cast<Eigen::Index>(data.front().dim());
  Eigen::Index rows = 0;
  for (const auto& s : data) {
    require(static_cast<Eigen::Index>(s.dim()) == d, "all trials must share the stacking ratio");
    if (s.length() > r) rows += static_cast<Eigen::Index>(s.length() - r);
  }
  const Eigen::Index k = 1 + d * static_cast<Eigen::Index>(r);
  Eigen::MatrixXd X(rows, k), Y(rows, d);
  Eigen::Index row = 0;
  for (const auto& s : data) {
    for (Eigen::Index t = static_cast<Eigen::Index>(r); t < s.rows.rows(); ++t, ++row) {
      Y.row(row) = s.rows.row(t);
      X(row, 0) = 1.0;
      for (Eigen::Index l = 1; l <= static_cast<Eigen::Index>(r); ++l)
        X.block(row, 1 + (l - 1) * d, 1, d) = s.rows.row(t - l);
    }
  }
  return {std::move(X), std::move(Y)};
}

}  // namespace detail

/// Multi-trial least squares for a VAR(r) on stacked vectors with intercept.
inline StackedFit fit_stacked_var(const std::vector<StackedSeries>& data, std::size_t r = 1) {
  require(!data.empty(), "no trials to fit");
  require(r >= 1, "VAR order must be >= 1");
  const auto [X, Y] = detail::stacked_design(data, r);
  const auto d = Y.cols();
  const Eigen::Index k = X.cols();
  require(X.rows() >= 20 * d * static_cast<Eigen::Index>(r),
          "not enough rows: need at least 20 (m+1) r observations");
  require(X.rows() > k, "more parameters than observations");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k) throw NumericalFailure("stacked VAR design is rank deficient");
  StackedFit fit;
  fit.B = qr.solve(Y);
  const Eigen::MatrixXd E = Y - X * fit.B;
  fit.n_rows = static_cast<std::size_t>(X.rows());
  fit.sigma = E.transpose() * E / static_cast<double>(X.rows() - k);
  fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose());
  fit.xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  fit.intercept = fit.B.row(0).transpose();

  std::vector<Eigen::MatrixXd> A;
  for (std::size_t tau = 1; tau <= r; ++tau)
    A.push_back(fit.B.block(1 + static_cast<Eigen::Index>(tau - 1) * d, 0, d, d).transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(fit.sigma);
  if (llt.info() != Eigen::Success) throw NumericalFailure("residual covariance is not positive definite");
  fit.model = VARModel(std::move(A), fit.sigma, data.front().fs);
  return fit;
}

enum class FlowDirection { hf_to_lf, lf_to_hf };

struct WaldResult {
  double statistic = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool f_variant = false;
};

/// Wald test that every lag of the source components is zero in the target
/// equations. HF->LF restricts the HF lags in the x_L equation; LF->HF
/// restricts the x_L lags in all HF equations. The F variant divides by the
/// number of restrictions and uses (q, N - k) degrees of freedom.
inline WaldResult mfvar_gc_test(const StackedFit& fit, FlowDirection dir, bool f_variant = false) {
  const auto d = static_cast<std::size_t>(fit.sigma.rows());
  const std::size_t m = d - 1;
  const std::size_t r = fit.model.order();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;  // (design row, equation)
  for (std::size_t tau = 1; tau <= r; ++tau) {
    const auto base = static_cast<Eigen::Index>(1 + (tau - 1) * d);
    if (dir == FlowDirection::hf_to_lf) {
      for (std::size_t j = 0; j < m; ++j) cells.emplace_back(base + static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
    } else {
      for (std::size_t i = 0; i < m; ++i) cells.emplace_back(base + static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i));
    }
  }
  const auto q = static_cast<Eigen::Index>(cells.size());
  Eigen::VectorXd b(q);
  Eigen::MatrixXd C(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    const auto [ra, ea] = cells[static_cast<std::size_t>(a)];
    b(a) = fit.B(ra, ea);
    for (Eigen::Index c = 0; c < q; ++c) {
      const auto [rc, ec] = cells[static_cast<std::size_t>(c)];
      C(a, c) = fit.sigma(ea, ec) * fit.xtx_inv(ra, rc);
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(C);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    throw NumericalFailure("Wald covariance is not positive definite");
  WaldResult w;
  w.statistic = b.dot(ldlt.solve(b));
  w.df = static_cast<double>(q);
  w.f_variant = f_variant;
  if (f_variant) {
    const double df2 = static_cast<double>(fit.n_rows) - static_cast<double>(fit.B.rows());
    w.statistic /= w.df;
    boost::math::fisher_f dist(w.df, df2);
    w.p = boost::math::cdf(boost::math::complement(dist, w.statistic));
  } else {
    boost::math::chi_squared dist(w.df);
    w.p = boost::math::cdf(boost::math::complement(dist, w.statistic));
  }
  return w;
}

inline WaldResult mfvar_gc_test(const MFPair& pair, FlowDirection dir, std::size_t r = 1, bool f_variant = false) {
  return mfvar_gc_test(fit_stacked_var(stack(pair), r), dir, f_variant);
}

struct BenchmarkConfig {
  std::vector<std::string> methods{"tfcca", "mfvar"};
  std::vector<std::size_t> trial_counts{2, 4, 8, 16, 32, 64};
  std::size_t hf_samples = 4000;
  std::size_t ratio = 5;
  std::size_t repeats = 3;
  std::size_t mfvar_order = 1;
  std::uint64_t seed = 0;
  PipelineConfig pipeline{};  ///< surrogate count and window used by the tfcca method
};

struct BenchmarkReport {
  std::vector<std::size_t> trial_counts;
  std::map<std::string, std::vector<double>> seconds;  ///< median wall time per count
  std::map<std::string, std::vector<std::vector<double>>> runs;
  std::map<std::string, double> slope;                 ///< log-log least-squares slope
  unsigned threads = 1;
  std::size_t hf_samples = 0, lf_samples = 0, surrogates = 0;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope needs at least two points");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "log-log slope needs positive values");
    A(static_cast<Eigen::Index>(i), 0) = 1.0;
    A(static_cast<Eigen::Index>(i), 1) = std::log(x[i]);
    b(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  return A.colPivHouseholderQr().solve(b)(1);
}

/// Times each method over nested trial subsets of the unidirectional X->Y
/// system. Methods run one after another; the median of `repeats` runs is kept.
inline BenchmarkReport benchmark(const BenchmarkConfig& cfg) {
  require(cfg.trial_counts.size() >= 2, "benchmark needs at least two trial counts");
  require(std::is_sorted(cfg.trial_counts.begin(), cfg.trial_counts.end()) && cfg.trial_counts.front() >= 1,
          "trial counts must be positive and increasing");
  require(cfg.trial_counts.back() >= 8 * cfg.trial_counts.front(), "trial counts must span at least a factor of 8");
  require(cfg.repeats >= 1, "need at least one repeat");
  for (const auto& m : cfg.methods) require(m == "tfcca" || m == "mfvar", "unknown benchmark method '" + m + "'");

  const VARModel model = make_unidirectional_var4(Coupling::x_to_y);
  const std::size_t n_max = cfg.trial_counts.back();
  const auto data = simulate_var(model, cfg.hf_samples, n_max, 1000, cfg.seed, cfg.pipeline.threads);
  std::vector<TimeSeries> lf_all;
  for (const auto& t : data[1]) lf_all.push_back(lowpass_decimate(t, cfg.ratio));

  BenchmarkReport rep;
  rep.trial_counts = cfg.trial_counts;
  rep.threads = cfg.pipeline.threads;
  rep.hf_samples = cfg.hf_samples;
  rep.lf_samples = lf_all.front().size();
  rep.surrogates = cfg.pipeline.surrogate.n_reps;

  for (const auto& method : cfg.methods) {
    std::vector<double> med;
    std::vector<std::vector<double>> all;
    for (std::size_t n : cfg.trial_counts) {
      const auto cut = static_cast<std::ptrdiff_t>(n);
      const MFPair pair(MultiTrialSeries(std::vector<TimeSeries>(data[0].trials().begin(), data[0].trials().begin() + cut)),
                        MultiTrialSeries(std::vector<TimeSeries>(lf_all.begin(), lf_all.begin() + cut)));
      std::vector<double> times;
      for (std::size_t k = 0; k < cfg.repeats; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        if (method == "tfcca") {
          const auto prof = lag_cc_profile(pair, cfg.pipeline);
          (void)decide_direction(prof, cfg.pipeline);
        } else {
          (void)mfvar_gc_test(pair, FlowDirection::hf_to_lf, cfg.mfvar_order);
          (void)mfvar_gc_test(pair, FlowDirection::lf_to_hf, cfg.mfvar_order);
        }
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      all.push_back(times);
      std::sort(times.begin(), times.end());
      med.push_back(times[times.size() / 2]);
    }
    std::vector<double> xs(cfg.trial_counts.begin(), cfg.trial_counts.end());
    rep.slope[method] = loglog_slope(xs, med);
    rep.seconds[method] = std::move(med);
    rep.runs[method] = std::move(all);
  }
  return rep;
}

}  // namespace mfcausal
