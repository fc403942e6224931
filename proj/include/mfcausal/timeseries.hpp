#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfcausal/core.hpp"
#include "mfcausal/fir.hpp"

namespace mfcausal {

/// Uniformly sampled real signal. Sample k sits at t0 + k / fs.
///
/// `edge` counts samples at each end that are filter transients (set by
/// lowpass_decimate); correlation statistics skip them.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::vector<double> samples, double fs, double t0 = 0.0, std::size_t edge = 0)
      : samples_(std::move(samples)), fs_(fs), t0_(t0), edge_(edge) {
    require(std::isfinite(fs_) && fs_ > 0.0, "sampling rate must be positive");
    require(std::isfinite(t0_), "start time must be finite");
    for (std::size_t k = 0; k < samples_.size(); ++k)
      if (!std::isfinite(samples_[k]))
        throw InvalidArgument("non-finite sample at index " + std::to_string(k));
  }

  std::span<const double> samples() const noexcept { return samples_; }
  const std::vector<double>& values() const noexcept { return samples_; }
  double operator[](std::size_t k) const { return samples_[k]; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double fs() const noexcept { return fs_; }
  double t0() const noexcept { return t0_; }
  double dt() const noexcept { return 1.0 / fs_; }
  double time_at(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) / fs_; }
  double duration() const noexcept { return static_cast<double>(samples_.size()) / fs_; }
  std::size_t edge() const noexcept { return edge_; }

  /// Half-open range of samples outside the transient edges.
  std::pair<std::size_t, std::size_t> valid_range() const noexcept {
    if (2 * edge_ >= samples_.size()) return {0, 0};
    return {edge_, samples_.size() - edge_};
  }

  TimeSeries with_samples(std::vector<double> s) const { return {std::move(s), fs_, t0_, edge_}; }

 private:
  std::vector<double> samples_;
  double fs_ = 1.0;
  double t0_ = 0.0;
  std::size_t edge_ = 0;
};

/// Trials sharing one sampling rate and length.
class MultiTrialSeries {
 public:
  MultiTrialSeries() = default;
  explicit MultiTrialSeries(std::vector<TimeSeries> trials) : trials_(std::move(trials)) {
    require(!trials_.empty(), "at least one trial is required");
    const auto& first = trials_.front();
    for (std::size_t i = 1; i < trials_.size(); ++i) {
      require(trials_[i].size() == first.size(), "trials must have equal length");
      require(trials_[i].fs() == first.fs(), "trials must share a sampling rate");
    }
  }

  std::size_t n_trials() const noexcept { return trials_.size(); }
  std::size_t length() const noexcept { return trials_.empty() ? 0 : trials_.front().size(); }
  double fs() const noexcept { return trials_.empty() ? 0.0 : trials_.front().fs(); }
  const TimeSeries& operator[](std::size_t i) const { return trials_[i]; }
  const std::vector<TimeSeries>& trials() const noexcept { return trials_; }
  auto begin() const noexcept { return trials_.begin(); }
  auto end() const noexcept { return trials_.end(); }

 private:
  std::vector<TimeSeries> trials_;
};

/// Mixed-frequency pair: HF rate is an exact integer multiple (>= 2) of the LF
/// rate, and every LF sample lands on the HF grid.
class MFPair {
 public:
  MFPair(MultiTrialSeries hf, MultiTrialSeries lf) : hf_(std::move(hf)), lf_(std::move(lf)) {
    require(hf_.n_trials() == lf_.n_trials(), "HF and LF trial counts differ");
    const double ratio = hf_.fs() / lf_.fs();
    const double rounded = std::round(ratio);
    require(std::abs(ratio - rounded) <= 1e-9 * ratio && rounded >= 2.0,
            "HF rate must be an integer multiple (>= 2) of the LF rate");
    ratio_ = static_cast<std::size_t>(rounded);
    const double off = (lf_[0].t0() - hf_[0].t0()) * hf_.fs();
    require(std::abs(off - std::round(off)) <= 1e-6, "LF samples do not fall on the HF grid");
    offset_ = static_cast<std::ptrdiff_t>(std::round(off));
    const double lf_period = 1.0 / lf_.fs();
    for (std::size_t i = 0; i < hf_.n_trials(); ++i)
      require(std::abs(hf_[i].duration() - lf_[i].duration()) <= lf_period + 1e-9,
              "HF and LF trial durations differ by more than one LF period");
  }

  const MultiTrialSeries& hf() const noexcept { return hf_; }
  const MultiTrialSeries& lf() const noexcept { return lf_; }
  std::size_t ratio() const noexcept { return ratio_; }
  std::size_t n_trials() const noexcept { return hf_.n_trials(); }
  /// HF index of LF sample 0.
  std::ptrdiff_t offset() const noexcept { return offset_; }

 private:
  MultiTrialSeries hf_;
  MultiTrialSeries lf_;
  std::size_t ratio_ = 0;
  std::ptrdiff_t offset_ = 0;
};

inline double mean_of(std::span<const double> x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased (n-1) sample variance.
inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Zero-phase anti-alias low-pass (cutoff 0.5 * fs/factor) followed by
/// keeping every factor-th sample, starting with sample 0. Trailing samples
/// that do not fill a whole output period are dropped.
inline TimeSeries lowpass_decimate(const TimeSeries& ts, std::size_t factor) {
  require(factor >= 2, "decimation factor must be >= 2");
  require(ts.size() >= 10 * factor, "series too short to decimate by this factor");
  const auto h = fir::decimation_filter(factor, ts.fs());
  const auto filtered = fir::apply_zero_phase(ts.samples(), h);
  const std::size_t n_out = ts.size() / factor;
  std::vector<double> out(n_out);
  for (std::size_t k = 0; k < n_out; ++k) out[k] = filtered[k * factor];
  const std::size_t half = h.size() / 2;
  const std::size_t edge = std::min(n_out / 2, (half + factor - 1) / factor);
  return {std::move(out), ts.fs() / static_cast<double>(factor), ts.t0(), edge};
}

inline TimeSeries detrend_linear(const TimeSeries& ts) {
  require(ts.size() >= 3, "detrending needs at least 3 samples");
  const auto n = static_cast<double>(ts.size());
  const double tbar = (n - 1.0) / 2.0;
  const double ybar = mean_of(ts.samples());
  double sty = 0.0, stt = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double dt = static_cast<double>(k) - tbar;
    sty += dt * (ts[k] - ybar);
    stt += dt * dt;
  }
  const double slope = sty / stt;
  std::vector<double> out(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k)
    out[k] = ts[k] - ybar - slope * (static_cast<double>(k) - tbar);
  return ts.with_samples(std::move(out));
}

/// Standardizes to zero mean and unit (n-1) variance.
inline TimeSeries zscore(const TimeSeries& ts) {
  const double m = mean_of(ts.samples());
  const double v = variance_of(ts.samples());
  if (!(v > kVarianceEpsilon * (v + m * m)))
    throw DegenerateInput("zscore: variance below epsilon");
  const double s = std::sqrt(v);
  std::vector<double> out(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) out[k] = (ts[k] - m) / s;
  return ts.with_samples(std::move(out));
}

enum class XcorrNormalization {
  local,   ///< Pearson correlation over each lag's overlapping samples.
  global,  ///< Sum of products over the overlap divided by whole-series energies.
};

struct XcorrProfile {
  std::vector<double> lags;    ///< seconds; negative = x leads y
  std::vector<double> values;  ///< in [-1, 1]
};

/// Lagged normalized cross-correlation, value(l) = corr(x(t + l), y(t)).
/// A peak at negative lag means x leads y. Inputs may have different rates;
/// the lag step is 1 / max(x.fs, y.fs) and the coarser series supplies the
/// time points. Lags with fewer than 3 overlapping pairs are omitted.
inline XcorrProfile lagged_xcorr(const TimeSeries& x, const TimeSeries& y, double max_lag,
                                 XcorrNormalization norm = XcorrNormalization::local) {
  require(max_lag >= 0.0, "max_lag must be nonnegative");
  const double fine = std::max(x.fs(), y.fs());
  const bool x_coarse = x.fs() < y.fs();
  const TimeSeries& coarse = x_coarse ? x : y;
  const TimeSeries& other = x_coarse ? y : x;
  const auto n_lag = static_cast<std::ptrdiff_t>(std::floor(max_lag * fine + 1e-9));

  double ex = 0.0, ey = 0.0, mx = mean_of(x.samples()), my = mean_of(y.samples());
  for (double v : x.samples()) ex += (v - mx) * (v - mx);
  for (double v : y.samples()) ey += (v - my) * (v - my);

  XcorrProfile out;
  const auto [c_lo, c_hi] = coarse.valid_range();
  const auto [o_lo, o_hi] = other.valid_range();
  for (std::ptrdiff_t l = -n_lag; l <= n_lag; ++l) {
    const double lag = static_cast<double>(l) / fine;
    // x is evaluated at t + lag, y at t; the "other" series is shifted accordingly.
    const double shift = x_coarse ? -lag : lag;
    std::vector<double> a, b;
    for (std::size_t k = c_lo; k < c_hi; ++k) {
      const double pos = (coarse.time_at(k) + shift - other.t0()) * other.fs();
      const double r = std::round(pos);
      if (std::abs(pos - r) > 1e-6 || r < static_cast<double>(o_lo) ||
          r >= static_cast<double>(o_hi))
        continue;
      const double ov = other[static_cast<std::size_t>(r)];
      if (x_coarse) {
        a.push_back(coarse[k]);
        b.push_back(ov);
      } else {
        a.push_back(ov);
        b.push_back(coarse[k]);
      }
    }
    if (a.size() < 3) continue;
    double value = 0.0;
    if (norm == XcorrNormalization::local) {
      const double ma = mean_of(a), mb = mean_of(b);
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
      }
      if (saa <= 0.0 || sbb <= 0.0) continue;
      value = sab / std::sqrt(saa * sbb);
    } else {
      double sab = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) sab += (a[i] - mx) * (b[i] - my);
      if (ex <= 0.0 || ey <= 0.0) continue;
      value = sab / std::sqrt(ex * ey);
    }
    out.lags.push_back(lag);
    out.values.push_back(std::clamp(value, -1.0, 1.0));
  }
  return out;
}

}  // namespace mfcausal
