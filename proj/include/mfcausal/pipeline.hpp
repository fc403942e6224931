#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfcausal/cca.hpp"
#include "mfcausal/core.hpp"
#include "mfcausal/spectral.hpp"
#include "mfcausal/stats.hpp"
#include "mfcausal/surrogate.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal {

enum class CCAMode { complex, magnitude };
enum class TestKind { t, ks };
enum class ConditionDomain { time, time_frequency };

struct LagGrid {
  double min = -0.5;
  double max = 0.5;
  double step = 0.005;
};

struct PipelineConfig {
  STFTConfig stft{};
  CCAMode mode = CCAMode::complex;
  RegConfig reg{};
  LagGrid lags{};
  SurrogateConfig surrogate{};
  TestKind test = TestKind::t;
  double alpha = 0.05;
  /// Consecutive significant lags needed on one side for a verdict.
  std::size_t consecutive = 3;
  /// Lags with |lag| <= boundary * W_t are ignored by decide_direction.
  double boundary = 0.5;
  bool drop_dc = true;
  bool zscore_lf = true;
  unsigned threads = 1;

  void validate(double hf_fs) const {
    require(stft.window_len > 0.0, "window length must be positive");
    require(lags.step * hf_fs >= 1.0 - 1e-9, "lag step must be at least one HF sample");
    require(lags.min <= lags.max, "lag grid min exceeds max");
    require(alpha > 0.0 && alpha <= 0.5, "alpha must lie in (0, 0.5]");
    require(consecutive >= 1, "consecutive-lag count must be >= 1");
    require(boundary >= 0.0, "decision boundary must be nonnegative");
    if (surrogate.n_reps > 0 || surrogate.enforce_range) surrogate.validate();
  }
};

struct LagCCProfile {
  std::vector<double> lags;                 ///< seconds, lag = t_frame - t_LF
  std::vector<std::vector<double>> cc;      ///< [lag][trial]
  std::vector<double> mean_cc;
  std::vector<stats::Interval> ci95;        ///< empty for a single trial
  std::vector<std::vector<double>> null_cc; ///< [lag][repetition]
  std::vector<double> surrogate_mean;
  std::vector<stats::Interval> surrogate_band;  ///< 2.5 / 97.5 percentiles
  std::vector<double> p_values;
  std::vector<double> p_adjusted;           ///< Benjamini-Hochberg across lags
  std::vector<double> dropped_lags;
  double window_len = 0.0;

  bool has_significance() const noexcept { return !p_adjusted.empty(); }
};

enum class Direction { hf_to_lf, lf_to_hf, bidirectional, none };

inline std::string to_string(Direction d, const std::string& hf = "HF", const std::string& lf = "LF") {
  switch (d) {
    case Direction::hf_to_lf: return hf + "->" + lf;
    case Direction::lf_to_hf: return lf + "->" + hf;
    case Direction::bidirectional: return "bidirectional";
    case Direction::none: return "none";
  }
  return "none";
}

struct SidePeak {
  double lag = 0.0;
  double cc = 0.0;
};

struct DirectionVerdict {
  Direction verdict = Direction::none;
  std::vector<double> hf_to_lf_lags;  ///< significant lags beyond -boundary
  std::vector<double> lf_to_hf_lags;  ///< significant lags beyond +boundary
  std::optional<SidePeak> hf_to_lf_peak;
  std::optional<SidePeak> lf_to_hf_peak;
};

struct FrequencyPeak {
  double freq = 0.0;
  double height = 0.0;
};

struct CanonicalFrequencyReport {
  double lag = 0.0;
  std::vector<double> freqs;
  std::vector<double> mean_abs_u;
  std::vector<FrequencyPeak> peaks;
  double f0 = 0.0;
  double threshold = 0.0;
};

struct BandGain {
  double f_lo = 0.0, f_hi = 0.0;
  std::vector<double> delta_cc;  ///< per trial
  double mean_delta = 0.0;
  std::optional<stats::Interval> ci95;
};

struct CCGainReport {
  double lag = 0.0;
  std::vector<double> baseline_cc;
  std::vector<BandGain> bands;
};

namespace detail {

inline std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) {
  std::ptrdiff_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Dense STFT features of one HF trial, rows indexed by frame start sample.
struct FrameFeatures {
  Eigen::MatrixXcd F;
  std::vector<double> freqs;
  std::size_t window = 0;
};

inline FrameFeatures frame_features(const TimeSeries& x, const STFTConfig& stft_cfg, CCAMode mode,
                                    bool drop_dc) {
  STFTConfig dense = stft_cfg;
  dense.hop = 0.0;
  auto spec = zscore_per_frequency(stft(x, dense)).spec;
  if (mode == CCAMode::magnitude) spec = magnitude(spec);
  if (drop_dc) {
    std::vector<std::size_t> bins;
    for (std::size_t k = 1; k < spec.n_freqs(); ++k) bins.push_back(k);
    spec = select_bins(spec, bins);
  }
  return {std::move(spec.values), std::move(spec.freqs), spec.window_samples};
}

/// Prefix sums of f f^H and f over frames of each residue class mod m.
class FrameMoments {
 public:
  FrameMoments(const Eigen::MatrixXcd& F, std::size_t m) : F_(&F), m_(m), d_(F.cols()) {
    const auto nf = static_cast<std::size_t>(F.rows());
    outer_.resize(m);
    sum_.resize(m);
    const Eigen::Index dd = d_ * d_;
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t T = r < nf ? (nf - r + m - 1) / m : 0;
      outer_[r].setZero(dd, static_cast<Eigen::Index>(T + 1));
      sum_[r].setZero(d_, static_cast<Eigen::Index>(T + 1));
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d_, d_);
      Eigen::VectorXcd s = Eigen::VectorXcd::Zero(d_);
      for (std::size_t t = 0; t < T; ++t) {
        const Eigen::VectorXcd f = F.row(static_cast<Eigen::Index>(r + m * t)).transpose();
        acc.noalias() += f * f.adjoint();
        s += f;
        outer_[r].col(static_cast<Eigen::Index>(t + 1)) = Eigen::Map<const Eigen::VectorXcd>(acc.data(), dd);
        sum_[r].col(static_cast<Eigen::Index>(t + 1)) = s;
      }
    }
  }

  /// Sums over frames j = j0 + m*i, i in [0, n).
  void range(std::size_t j0, std::size_t n, Eigen::MatrixXcd& ff, Eigen::VectorXcd& f) const {
    const std::size_t r = j0 % m_, ta = j0 / m_, tb = ta + n;
    const Eigen::VectorXcd v = outer_[r].col(static_cast<Eigen::Index>(tb)) - outer_[r].col(static_cast<Eigen::Index>(ta));
    ff = Eigen::Map<const Eigen::MatrixXcd>(v.data(), d_, d_);
    f = sum_[r].col(static_cast<Eigen::Index>(tb)) - sum_[r].col(static_cast<Eigen::Index>(ta));
  }

  const Eigen::MatrixXcd& features() const noexcept { return *F_; }
  Eigen::Index dim() const noexcept { return d_; }

 private:
  const Eigen::MatrixXcd* F_;
  std::size_t m_;
  Eigen::Index d_;
  std::vector<Eigen::MatrixXcd> outer_;
  std::vector<Eigen::MatrixXcd> sum_;
};

/// Centred covariance of the joint frame features and their cross moment
/// with the LF sample, for one lag.
struct LagCov {
  std::size_t n = 0;
  Eigen::MatrixXcd Sff;
  Eigen::VectorXcd Sfy;
  double syy = 0.0;
};

/// One trial's aligned data: HF-grid features plus the LF series.
class TrialEvaluator {
 public:
  TrialEvaluator(const Eigen::MatrixXcd& F, std::size_t window, const TimeSeries& hf, const TimeSeries& lf,
                 std::size_t m, bool zscore_lf)
      : moments_(F, m), m_(static_cast<std::ptrdiff_t>(m)), half_(static_cast<std::ptrdiff_t>(window / 2)),
        nf_(F.rows()) {
    const TimeSeries y = zscore_lf ? zscore(lf) : lf;
    y_.assign(y.samples().begin(), y.samples().end());
    std::tie(klo_, khi_) = lf.valid_range();
    const double off = (lf.t0() - hf.t0()) * hf.fs();
    off_ = static_cast<std::ptrdiff_t>(std::llround(off));
    require(std::abs(off - static_cast<double>(off_)) <= 1e-6, "LF samples do not fall on the HF grid");
  }

  /// LF index range whose frames exist at lag L (HF samples).
  std::pair<std::ptrdiff_t, std::ptrdiff_t> rows(std::ptrdiff_t L) const {
    const std::ptrdiff_t base = off_ + L - half_;
    std::ptrdiff_t kmin = -floor_div(base, m_);
    if (base + kmin * m_ < 0) ++kmin;
    const std::ptrdiff_t kmax = floor_div(nf_ - 1 - base, m_);
    kmin = std::max<std::ptrdiff_t>(kmin, static_cast<std::ptrdiff_t>(klo_));
    const std::ptrdiff_t kend = std::min<std::ptrdiff_t>(kmax + 1, static_cast<std::ptrdiff_t>(khi_));
    return {kmin, std::max(kmin, kend)};
  }

  std::size_t frame_of(std::ptrdiff_t k, std::ptrdiff_t L) const {
    return static_cast<std::size_t>(off_ + k * m_ + L - half_);
  }

  LagCov covariance(std::ptrdiff_t L) const {
    const auto [k0, k1] = rows(L);
    LagCov c;
    c.n = static_cast<std::size_t>(k1 - k0);
    if (c.n < 2) return c;
    const auto n = static_cast<double>(c.n);
    Eigen::MatrixXcd ff;
    Eigen::VectorXcd fs;
    moments_.range(frame_of(k0, L), c.n, ff, fs);
    const auto& F = moments_.features();
    Eigen::VectorXcd fy = Eigen::VectorXcd::Zero(moments_.dim());
    double ys = 0.0, yy = 0.0;
    for (std::ptrdiff_t k = k0; k < k1; ++k) {
      const double y = y_[static_cast<std::size_t>(k)];
      fy += y * F.row(static_cast<Eigen::Index>(frame_of(k, L))).transpose();
      ys += y;
      yy += y * y;
    }
    c.Sff = (ff - fs * fs.adjoint() / n) / (n - 1.0);
    c.Sff = hermitian_part(c.Sff);
    c.Sfy = (fy - fs * (ys / n)) / (n - 1.0);
    c.syy = (yy - ys * ys / n) / (n - 1.0);
    return c;
  }

  const std::vector<double>& lf_values() const noexcept { return y_; }

 private:
  FrameMoments moments_;
  std::ptrdiff_t m_, half_, nf_;
  std::ptrdiff_t off_ = 0;
  std::size_t klo_ = 0, khi_ = 0;
  std::vector<double> y_;
};

}  // namespace detail

/// Closed form for a univariate Y block: rho^2 = s^H Sxx^-1 s / syy with
/// the ridges applied as in cca_from_covariances.
inline CCASolution cca_univariate(const Eigen::MatrixXcd& Sxx, const Eigen::VectorXcd& sxy, double syy,
                                  const RegConfig& reg) {
  const Eigen::MatrixXcd A = ridge(Sxx, reg.lambda_x);
  const double syy_r = syy * (1.0 + reg.lambda_y);
  if (!(syy_r > 0.0)) throw NumericalFailure("covariance block Syy is singular after regularization");
  Eigen::LLT<Eigen::MatrixXcd> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalFailure("covariance block Sxx is not positive definite");
  const Eigen::VectorXcd w = llt.solve(sxy);
  const double q = std::max(0.0, sxy.dot(w).real());
  CCASolution sol;
  sol.rho = std::clamp(std::sqrt(q / syy_r), 0.0, 1.0);
  sol.all_rhos = {sol.rho};
  sol.u = q > 0.0 ? Eigen::VectorXcd(w / std::sqrt(q)) : Eigen::VectorXcd::Zero(sxy.size());
  sol.v = Eigen::VectorXcd::Constant(1, 1.0 / std::sqrt(syy_r));
  Eigen::Index imax = 0;
  sol.u.cwiseAbs().maxCoeff(&imax);
  if (std::abs(sol.u(imax)) > 0.0) {
    const std::complex<double> phase = std::conj(sol.u(imax)) / std::abs(sol.u(imax));
    sol.u *= phase;
    sol.v *= phase;
  }
  return sol;
}

/// Lag grid quantized to whole HF samples, duplicates removed.
inline std::vector<std::ptrdiff_t> lag_grid_samples(const LagGrid& g, double hf_fs) {
  std::vector<std::ptrdiff_t> out;
  const auto n = static_cast<std::size_t>(std::floor((g.max - g.min) / g.step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    const auto L = lag_samples(g.min + static_cast<double>(i) * g.step, hf_fs);
    if (out.empty() || out.back() != L) out.push_back(L);
  }
  return out;
}

namespace detail {

constexpr std::size_t kMinRows = 10;

/// Conditioning features on the HF frame grid (one row per frame start).
using FrameConditioner = std::optional<Eigen::MatrixXcd>;

/// CC of one trial at every lag; NaN where the lag leaves too few rows.
/// With a conditioner the features are [X | Z] and partial CCA is used.
inline std::vector<double> trial_profile(const TimeSeries& hf, const TimeSeries& lf, std::size_t m,
                                         const PipelineConfig& cfg, const std::vector<std::ptrdiff_t>& lags,
                                         const FrameConditioner& z = std::nullopt,
                                         std::vector<Eigen::VectorXcd>* coefficients = nullptr) {
  auto feats = frame_features(hf, cfg.stft, cfg.mode, cfg.drop_dc);
  const Eigen::Index p = feats.F.cols();
  if (z) {
    require(z->rows() == feats.F.rows(), "conditioning features do not match the HF frame grid");
    Eigen::MatrixXcd joint(feats.F.rows(), p + z->cols());
    joint << feats.F, *z;
    feats.F = std::move(joint);
  }
  const TrialEvaluator ev(feats.F, feats.window, hf, lf, m, cfg.zscore_lf);
  std::vector<double> out(lags.size(), std::nan(""));
  if (coefficients) coefficients->assign(lags.size(), Eigen::VectorXcd());
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const auto c = ev.covariance(lags[i]);
    if (c.n < kMinRows) continue;
    CCASolution sol;
    if (!z) {
      sol = cca_univariate(c.Sff, c.Sfy, c.syy, cfg.reg);
    } else {
      const Eigen::Index q = c.Sff.cols() - p;
      const Eigen::MatrixXcd Szz = ridge(c.Sff.bottomRightCorner(q, q), cfg.reg.lambda_z);
      Eigen::LDLT<Eigen::MatrixXcd> ldlt(Szz);
      const Eigen::MatrixXcd Sxz = c.Sff.topRightCorner(p, q);
      const Eigen::VectorXcd Szy = c.Sfy.tail(q);
      const Eigen::MatrixXcd Bx = ldlt.solve(Sxz.adjoint());
      const Eigen::VectorXcd By = ldlt.solve(Szy);
      const Eigen::MatrixXcd Sxx = hermitian_part(c.Sff.topLeftCorner(p, p) - Sxz * Bx);
      const Eigen::VectorXcd Sxy = c.Sfy.head(p) - Sxz * By;
      const double syy = c.syy - Szy.dot(By).real();
      sol = cca_univariate(Sxx, Sxy, syy, cfg.reg);
    }
    out[i] = sol.rho;
    if (coefficients) (*coefficients)[i] = sol.u;
  }
  return out;
}

/// Generic path for conditioning series off the HF grid: per lag, align and
/// pick the conditioning row nearest each frame centre.
inline std::vector<double> trial_profile_generic(const TimeSeries& hf, const TimeSeries& lf, const TimeSeries& zser,
                                                 ConditionDomain domain, const PipelineConfig& cfg,
                                                 const std::vector<std::ptrdiff_t>& lags) {
  STFTConfig dense = cfg.stft;
  dense.hop = 0.0;
  auto spec = zscore_per_frequency(stft(hf, dense)).spec;
  if (cfg.mode == CCAMode::magnitude) spec = magnitude(spec);
  if (cfg.drop_dc) {
    std::vector<std::size_t> bins;
    for (std::size_t k = 1; k < spec.n_freqs(); ++k) bins.push_back(k);
    spec = select_bins(spec, bins);
  }
  const TimeSeries y = cfg.zscore_lf ? zscore(lf) : lf;

  // Conditioning rows and their centre times.
  Eigen::MatrixXcd Zrows;
  std::vector<double> ztimes;
  if (domain == ConditionDomain::time) {
    const TimeSeries zz = zscore(zser);
    Zrows.resize(static_cast<Eigen::Index>(zz.size()), 1);
    for (std::size_t i = 0; i < zz.size(); ++i) {
      Zrows(static_cast<Eigen::Index>(i), 0) = zz[i];
      ztimes.push_back(zz.time_at(i));
    }
  } else {
    const auto zf = frame_features(zser, cfg.stft, cfg.mode, cfg.drop_dc);
    Zrows = zf.F;
    for (Eigen::Index j = 0; j < zf.F.rows(); ++j)
      ztimes.push_back(zser.t0() + (static_cast<double>(j) + 0.5 * static_cast<double>(zf.window - 1)) / zser.fs());
  }
  const double zdt = 1.0 / zser.fs();

  std::vector<double> out(lags.size(), std::nan(""));
  for (std::size_t i = 0; i < lags.size(); ++i) {
    AlignedBlocks blk;
    try {
      blk = align_lagged(spec, y, static_cast<double>(lags[i]) / hf.fs(), 0);
    } catch (const InvalidArgument&) {
      continue;
    }
    std::vector<Eigen::Index> keep, zidx;
    for (std::size_t r = 0; r < blk.frames.size(); ++r) {
      const double t = spec.frame_times[blk.frames[r]];
      const double pos = (t - ztimes.front()) / zdt;
      // Half-sample centres (even windows) resolve upwards, matching z[j + N/2].
      const auto zi = static_cast<std::ptrdiff_t>(std::floor(pos + 0.5 + 1e-9));
      if (zi < 0 || zi >= static_cast<std::ptrdiff_t>(ztimes.size())) continue;
      keep.push_back(static_cast<Eigen::Index>(r));
      zidx.push_back(zi);
    }
    if (keep.size() < kMinRows) continue;
    const auto n = static_cast<Eigen::Index>(keep.size());
    DataBlock X(n, blk.X.cols()), Y(n, 1), Z(n, Zrows.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
      X.row(r) = blk.X.row(keep[static_cast<std::size_t>(r)]);
      Y(r, 0) = blk.Y(keep[static_cast<std::size_t>(r)], 0);
      Z.row(r) = Zrows.row(zidx[static_cast<std::size_t>(r)]);
    }
    out[i] = partial_cca(X, Y, Z, cfg.reg).rho;
  }
  return out;
}

inline double significance_p(const std::vector<double>& observed, const std::vector<double>& null, TestKind test) {
  return test == TestKind::t ? stats::welch_t_greater(observed, null).p : stats::ks_greater(observed, null).p;
}

/// Fills means, intervals, null band and p-values of a profile whose cc and
/// null_cc rows are complete.
inline void summarize(LagCCProfile& prof, TestKind test) {
  const std::size_t nl = prof.lags.size();
  prof.mean_cc.resize(nl);
  prof.ci95.clear();
  for (std::size_t i = 0; i < nl; ++i) {
    prof.mean_cc[i] = mean_of(prof.cc[i]);
    if (prof.cc[i].size() >= 2) prof.ci95.push_back(stats::mean_ci95(prof.cc[i]));
  }
  prof.surrogate_mean.clear();
  prof.surrogate_band.clear();
  prof.p_values.clear();
  prof.p_adjusted.clear();
  if (prof.null_cc.empty() || prof.null_cc.front().empty()) return;
  for (std::size_t i = 0; i < nl; ++i) {
    prof.surrogate_mean.push_back(mean_of(prof.null_cc[i]));
    prof.surrogate_band.push_back({stats::quantile(prof.null_cc[i], 0.025), stats::quantile(prof.null_cc[i], 0.975)});
    prof.p_values.push_back(significance_p(prof.cc[i], prof.null_cc[i], test));
  }
  prof.p_adjusted = stats::bh_adjust(prof.p_values);
}

/// Drops lags that were unusable in any trial or repetition and transposes
/// [trial][lag] results into [lag][trial].
inline LagCCProfile assemble(const std::vector<std::ptrdiff_t>& lags, double hf_fs,
                             const std::vector<std::vector<double>>& obs,
                             const std::vector<std::vector<double>>& null, const PipelineConfig& cfg) {
  LagCCProfile prof;
  prof.window_len = cfg.stft.window_len;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double lag = static_cast<double>(lags[i]) / hf_fs;
    bool ok = true;
    for (const auto& row : obs) ok = ok && !std::isnan(row[i]);
    for (const auto& row : null) ok = ok && !std::isnan(row[i]);
    if (!ok) {
      prof.dropped_lags.push_back(lag);
      continue;
    }
    prof.lags.push_back(lag);
    std::vector<double> c, nl;
    for (const auto& row : obs) c.push_back(row[i]);
    for (const auto& row : null) nl.push_back(row[i]);
    prof.cc.push_back(std::move(c));
    prof.null_cc.push_back(std::move(nl));
  }
  if (prof.lags.empty()) throw InvalidArgument("no lag in the grid leaves enough overlapping frames");
  summarize(prof, cfg.test);
  return prof;
}

/// Surrogate pair for pooled repetition j: trial j mod n_trials, HF and LF
/// phase-randomized with independent derived seeds.
inline std::pair<TimeSeries, TimeSeries> surrogate_pair(const MFPair& pair, const SurrogateConfig& sc, std::size_t j) {
  const std::size_t trial = j % pair.n_trials();
  return {phase_randomize(pair.hf()[trial], derive_seed(sc.seed, 1, j)),
          phase_randomize(pair.lf()[trial], derive_seed(sc.seed, 2, j))};
}

}  // namespace detail

/// Per-trial CC at each lag of the grid, no surrogates. Rows are trials.
inline std::vector<std::vector<double>> trial_cc(const MFPair& pair, const PipelineConfig& cfg,
                                                 const std::vector<std::ptrdiff_t>& lags) {
  std::vector<std::vector<double>> obs(pair.n_trials());
  parallel_for(pair.n_trials(), cfg.threads, [&](std::size_t t) {
    obs[t] = detail::trial_profile(pair.hf()[t], pair.lf()[t], pair.ratio(), cfg, lags);
  });
  return obs;
}

inline LagCCProfile lag_cc_profile(const MFPair& pair, const PipelineConfig& cfg) {
  cfg.validate(pair.hf().fs());
  const auto lags = lag_grid_samples(cfg.lags, pair.hf().fs());
  const auto obs = trial_cc(pair, cfg, lags);
  std::vector<std::vector<double>> null(cfg.surrogate.n_reps);
  parallel_for(null.size(), cfg.threads, [&](std::size_t j) {
    const auto [h, l] = detail::surrogate_pair(pair, cfg.surrogate, j);
    null[j] = detail::trial_profile(h, l, pair.ratio(), cfg, lags);
  });
  return detail::assemble(lags, pair.hf().fs(), obs, null, cfg);
}

inline LagCCProfile conditional_lag_cc_profile(const MFPair& pair, const MultiTrialSeries& conditioning,
                                               ConditionDomain domain, const PipelineConfig& cfg) {
  cfg.validate(pair.hf().fs());
  require(conditioning.n_trials() == pair.n_trials(), "conditioning trial count differs from the pair");
  const double hf_fs = pair.hf().fs();
  const auto lags = lag_grid_samples(cfg.lags, hf_fs);
  const bool on_hf_grid = conditioning.fs() == hf_fs;

  auto run = [&](const TimeSeries& h, const TimeSeries& l, const TimeSeries& z) {
    if (!on_hf_grid) return detail::trial_profile_generic(h, l, z, domain, cfg, lags);
    require(z.size() == h.size() && z.t0() == h.t0(), "conditioning series must be trial-aligned with HF");
    Eigen::MatrixXcd G;
    if (domain == ConditionDomain::time_frequency) {
      G = detail::frame_features(z, cfg.stft, cfg.mode, cfg.drop_dc).F;
    } else {
      const TimeSeries zz = zscore(z);
      const std::size_t n = window_samples(cfg.stft, hf_fs);
      const std::size_t nf = h.size() - n + 1;
      G.resize(static_cast<Eigen::Index>(nf), 1);
      for (std::size_t j = 0; j < nf; ++j) G(static_cast<Eigen::Index>(j), 0) = zz[j + n / 2];
    }
    return detail::trial_profile(h, l, pair.ratio(), cfg, lags, G);
  };

  std::vector<std::vector<double>> obs(pair.n_trials());
  parallel_for(pair.n_trials(), cfg.threads, [&](std::size_t t) {
    obs[t] = run(pair.hf()[t], pair.lf()[t], conditioning[t]);
  });
  std::vector<std::vector<double>> null(cfg.surrogate.n_reps);
  parallel_for(null.size(), cfg.threads, [&](std::size_t j) {
    const auto [h, l] = detail::surrogate_pair(pair, cfg.surrogate, j);
    null[j] = run(h, l, conditioning[j % pair.n_trials()]);
  });
  return detail::assemble(lags, hf_fs, obs, null, cfg);
}

/// Verdict from BH-adjusted p-values: a side counts when at least K
/// consecutive grid lags beyond +-boundary*W_t are significant.
inline DirectionVerdict decide_direction(const LagCCProfile& prof, double window_len, double alpha,
                                         std::size_t consecutive = 3, double boundary = 0.5) {
  DirectionVerdict out;
  if (!prof.has_significance()) return out;
  const double edge = boundary * window_len + 1e-12;
  auto side = [&](bool negative, std::vector<double>& lags_out, std::optional<SidePeak>& peak) {
    std::size_t run = 0, best = 0;
    const std::size_t n = prof.lags.size();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = negative ? n - 1 - s : s;  // walk outward from zero
      const double lag = prof.lags[i];
      const bool beyond = negative ? lag < -edge : lag > edge;
      if (!beyond) continue;
      if (!peak || prof.mean_cc[i] > peak->cc) peak = SidePeak{lag, prof.mean_cc[i]};
      if (prof.p_adjusted[i] < alpha) {
        lags_out.push_back(lag);
        best = std::max(best, ++run);
      } else {
        run = 0;
      }
    }
    return best >= consecutive;
  };
  const bool hf_lf = side(true, out.hf_to_lf_lags, out.hf_to_lf_peak);
  const bool lf_hf = side(false, out.lf_to_hf_lags, out.lf_to_hf_peak);
  out.verdict = hf_lf && lf_hf ? Direction::bidirectional
                : hf_lf        ? Direction::hf_to_lf
                : lf_hf        ? Direction::lf_to_hf
                               : Direction::none;
  return out;
}

inline DirectionVerdict decide_direction(const LagCCProfile& prof, const PipelineConfig& cfg) {
  return decide_direction(prof, cfg.stft.window_len, cfg.alpha, cfg.consecutive, cfg.boundary);
}

/// Local maxima of a spectrum above median + 2 * MAD, tallest first.
inline std::vector<FrequencyPeak> find_peaks(const std::vector<double>& freqs, const std::vector<double>& h,
                                             double* threshold_out = nullptr) {
  std::vector<FrequencyPeak> peaks;
  if (h.empty()) return peaks;
  const double med = stats::quantile(h, 0.5);
  std::vector<double> dev(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) dev[i] = std::abs(h[i] - med);
  const double thr = med + 2.0 * stats::quantile(dev, 0.5);
  if (threshold_out) *threshold_out = thr;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const bool left = i == 0 || h[i] > h[i - 1];
    const bool right = i + 1 == h.size() || h[i] > h[i + 1];
    if (left && right && h[i] > thr) peaks.push_back({freqs[i], h[i]});
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.height > b.height; });
  return peaks;
}

inline CanonicalFrequencyReport canonical_frequencies(const MFPair& pair, const PipelineConfig& cfg, double lag) {
  cfg.validate(pair.hf().fs());
  const std::vector<std::ptrdiff_t> lags{lag_samples(lag, pair.hf().fs())};
  std::vector<Eigen::VectorXd> absu(pair.n_trials());
  parallel_for(pair.n_trials(), cfg.threads, [&](std::size_t t) {
    std::vector<Eigen::VectorXcd> coef;
    const auto cc = detail::trial_profile(pair.hf()[t], pair.lf()[t], pair.ratio(), cfg, lags, std::nullopt, &coef);
    if (std::isnan(cc[0])) throw InvalidArgument("lag leaves too few overlapping frames");
    absu[t] = coef[0].cwiseAbs();
  });
  CanonicalFrequencyReport rep;
  rep.lag = static_cast<double>(lags[0]) / pair.hf().fs();
  const auto feats_freqs =
      detail::frame_features(pair.hf()[0], cfg.stft, cfg.mode, cfg.drop_dc).freqs;
  rep.freqs = feats_freqs;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(absu[0].size());
  for (const auto& a : absu) mean += a;
  mean /= static_cast<double>(absu.size());
  rep.mean_abs_u.assign(mean.data(), mean.data() + mean.size());
  rep.peaks = find_peaks(rep.freqs, rep.mean_abs_u, &rep.threshold);
  if (!rep.peaks.empty()) {
    rep.f0 = rep.peaks.front().freq;
  } else {
    const auto it = std::max_element(rep.mean_abs_u.begin(), rep.mean_abs_u.end());
    rep.f0 = rep.freqs[static_cast<std::size_t>(it - rep.mean_abs_u.begin())];
  }
  return rep;
}

inline CCGainReport cc_gain(const MFPair& pair, const PipelineConfig& cfg, double lag,
                            const std::vector<std::pair<double, double>>& bands) {
  cfg.validate(pair.hf().fs());
  const double fs = pair.hf().fs();
  for (const auto& [lo, hi] : bands)
    require(lo > 0.0 && lo < hi && hi < 0.5 * fs, "gain band must lie inside (0, fs/2)");
  const std::vector<std::ptrdiff_t> lags{lag_samples(lag, fs)};
  CCGainReport rep;
  rep.lag = static_cast<double>(lags[0]) / fs;
  rep.baseline_cc.resize(pair.n_trials());
  parallel_for(pair.n_trials(), cfg.threads, [&](std::size_t t) {
    rep.baseline_cc[t] = detail::trial_profile(pair.hf()[t], pair.lf()[t], pair.ratio(), cfg, lags)[0];
  });
  for (const auto& band : bands) {
    BandGain g{band.first, band.second, std::vector<double>(pair.n_trials()), 0.0, std::nullopt};
    parallel_for(pair.n_trials(), cfg.threads, [&](std::size_t t) {
      const TimeSeries filtered = bandstop(pair.hf()[t], g.f_lo, g.f_hi);
      g.delta_cc[t] = detail::trial_profile(filtered, pair.lf()[t], pair.ratio(), cfg, lags)[0] - rep.baseline_cc[t];
    });
    g.mean_delta = mean_of(g.delta_cc);
    if (g.delta_cc.size() >= 2) g.ci95 = stats::mean_ci95(g.delta_cc);
    rep.bands.push_back(std::move(g));
  }
  for (double c : rep.baseline_cc)
    if (std::isnan(c)) throw InvalidArgument("lag leaves too few overlapping frames");
  return rep;
}

/// Self-predictability calibration: CC at lag 0 between the HF spectrogram
/// and the HF signal itself decimated by `factor`, per trial.
inline std::vector<double> normalization_factor(const MultiTrialSeries& hf, const PipelineConfig& cfg,
                                                std::size_t factor) {
  cfg.validate(hf.fs());
  std::vector<double> out(hf.n_trials());
  const std::vector<std::ptrdiff_t> lags{0};
  parallel_for(hf.n_trials(), cfg.threads, [&](std::size_t t) {
    const TimeSeries lf = lowpass_decimate(hf[t], factor);
    const double c = detail::trial_profile(hf[t], lf, factor, cfg, lags)[0];
    if (std::isnan(c)) throw InvalidArgument("trial too short for the normalization factor");
    out[t] = std::clamp(c, 1e-12, 1.0);
  });
  return out;
}

inline double normalize_cc(double cc, double factor) {
  require(factor > 0.0, "normalization factor must be positive");
  return std::clamp(cc / factor, 0.0, 1.0);
}

}  // namespace mfcausal
