#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "mfcausal/core.hpp"
#include "mfcausal/fir.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal {

enum class WindowFn { rectangular, hann };

struct STFTConfig {
  double window_len = 0.2;  ///< seconds
  double hop = 0.0;         ///< seconds; 0 means one sample
  WindowFn window = WindowFn::hann;
};

/// Time-frequency matrix, frames along rows and one-sided frequency bins
/// along columns. Frame j covers source samples
/// [first_sample + j*hop_samples, ... + window_samples) and is stamped with
/// the time of the window centre.
struct Spectrogram {
  Eigen::MatrixXcd values;
  std::vector<double> frame_times;
  std::vector<double> freqs;
  double source_fs = 0.0;
  double source_t0 = 0.0;
  std::size_t window_samples = 0;
  std::size_t hop_samples = 1;
  std::size_t first_sample = 0;
  bool is_real = false;

  std::size_t n_frames() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_freqs() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

inline std::vector<double> make_window(std::size_t n, WindowFn fn) {
  std::vector<double> w(n, 1.0);
  if (fn == WindowFn::hann && n > 1)
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

inline std::size_t window_samples(const STFTConfig& cfg, double fs) {
  const double n = std::round(cfg.window_len * fs);
  require(std::isfinite(n) && n >= 2.0, "STFT window must span at least 2 samples");
  return static_cast<std::size_t>(n);
}

inline Spectrogram stft(const TimeSeries& ts, const STFTConfig& cfg) {
  const std::size_t n = window_samples(cfg, ts.fs());
  require(cfg.hop >= 0.0 && cfg.hop <= cfg.window_len + 1e-12, "STFT hop must lie in [0, W_t]");
  const std::size_t hop =
      cfg.hop == 0.0 ? 1 : std::max<std::size_t>(1, static_cast<std::size_t>(std::round(cfg.hop * ts.fs())));
  if (ts.size() < n) throw InvalidArgument("signal shorter than one STFT window");

  const std::size_t n_frames = (ts.size() - n) / hop + 1;
  const std::size_t n_freqs = n / 2 + 1;
  const auto w = make_window(n, cfg.window);

  Spectrogram out;
  out.values.resize(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_freqs));
  out.frame_times.resize(n_frames);
  out.freqs.resize(n_freqs);
  out.source_fs = ts.fs();
  out.source_t0 = ts.t0();
  out.window_samples = n;
  out.hop_samples = hop;
  for (std::size_t k = 0; k < n_freqs; ++k)
    out.freqs[k] = static_cast<double>(k) * ts.fs() / static_cast<double>(n);

  Eigen::FFT<double> fft;
  std::vector<double> seg(n);
  std::vector<std::complex<double>> spec;
  const auto x = ts.samples();
  for (std::size_t j = 0; j < n_frames; ++j) {
    const std::size_t s = j * hop;
    for (std::size_t i = 0; i < n; ++i) seg[i] = x[s + i] * w[i];
    fft.fwd(spec, seg);
    for (std::size_t k = 0; k < n_freqs; ++k)
      out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = spec[k];
    out.frame_times[j] = ts.time_at(s) + 0.5 * static_cast<double>(n - 1) / ts.fs();
  }
  return out;
}

struct NormalizedSpectrogram {
  Spectrogram spec;
  std::vector<std::size_t> degenerate_bins;
};

/// Per-bin centring and scaling to unit (n-1) variance, where the variance
/// of a complex bin is the mean squared modulus deviation. Bins whose
/// variance is below epsilon relative to their second moment are zeroed and
/// reported.
inline NormalizedSpectrogram zscore_per_frequency(const Spectrogram& spec) {
  require(spec.n_frames() >= 3, "per-frequency z-score needs at least 3 frames");
  NormalizedSpectrogram out{spec, {}};
  auto& v = out.spec.values;
  const auto rows = static_cast<double>(v.rows());
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    auto col = v.col(k);
    const std::complex<double> mean = col.mean();
    const double second = col.squaredNorm() / rows;
    col.array() -= mean;
    const double var = col.squaredNorm() / (rows - 1.0);
    if (!(var > kVarianceEpsilon * second)) {
      col.setZero();
      out.degenerate_bins.push_back(static_cast<std::size_t>(k));
      continue;
    }
    col /= std::sqrt(var);
  }
  return out;
}

inline Spectrogram magnitude(const Spectrogram& spec) {
  Spectrogram out = spec;
  out.values = spec.values.cwiseAbs().cast<std::complex<double>>();
  out.is_real = true;
  return out;
}

/// Keeps only the listed frequency bins, in the given order.
inline Spectrogram select_bins(const Spectrogram& spec, const std::vector<std::size_t>& bins) {
  Spectrogram out = spec;
  out.values.resize(spec.values.rows(), static_cast<Eigen::Index>(bins.size()));
  out.freqs.clear();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    require(bins[i] < spec.n_freqs(), "frequency bin out of range");
    out.values.col(static_cast<Eigen::Index>(i)) = spec.values.col(static_cast<Eigen::Index>(bins[i]));
    out.freqs.push_back(spec.freqs[bins[i]]);
  }
  return out;
}

/// Zero-phase Kaiser band-stop covering [f_lo, f_hi].
inline TimeSeries bandstop(const TimeSeries& ts, double f_lo, double f_hi) {
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < 0.5 * ts.fs()))
    throw InvalidArgument("band-stop needs 0 < f_lo < f_hi < fs/2");
  const auto h = fir::bandstop_filter(f_lo, f_hi, ts.fs());
  return ts.with_samples(fir::apply_zero_phase(ts.samples(), h));
}

struct PowerSpectrum {
  std::vector<double> freqs;
  std::vector<double> power;  ///< one-sided density, units^2 / Hz
};

/// Welch estimate: Hann segments of seg_len seconds with 50% overlap.
/// The sum of power * df approximates the signal variance.
inline PowerSpectrum psd(const TimeSeries& ts, double seg_len) {
  const auto n = static_cast<std::size_t>(std::round(seg_len * ts.fs()));
  if (n < 2 || n > ts.size()) throw InvalidArgument("PSD segment must fit inside the signal");
  const std::size_t step = std::max<std::size_t>(1, n / 2);
  const auto w = make_window(n, WindowFn::hann);
  double wss = 0.0;
  for (double v : w) wss += v * v;

  const std::size_t n_freqs = n / 2 + 1;
  PowerSpectrum out;
  out.freqs.resize(n_freqs);
  out.power.assign(n_freqs, 0.0);
  for (std::size_t k = 0; k < n_freqs; ++k)
    out.freqs[k] = static_cast<double>(k) * ts.fs() / static_cast<double>(n);

  Eigen::FFT<double> fft;
  std::vector<double> seg(n);
  std::vector<std::complex<double>> spec;
  const auto x = ts.samples();
  std::size_t count = 0;
  for (std::size_t s = 0; s + n <= ts.size(); s += step, ++count) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[s + i];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) seg[i] = (x[s + i] - m) * w[i];
    fft.fwd(spec, seg);
    for (std::size_t k = 0; k < n_freqs; ++k) {
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      out.power[k] += (edge ? 1.0 : 2.0) * std::norm(spec[k]);
    }
  }
  const double scale = 1.0 / (static_cast<double>(count) * ts.fs() * wss);
  for (double& p : out.power) p *= scale;
  return out;
}

}  // namespace mfcausal
