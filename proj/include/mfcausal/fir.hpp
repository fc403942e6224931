#pragma once

// Kaiser-window FIR design and zero-phase application.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "mfcausal/core.hpp"

namespace mfcausal::fir {

inline double kaiser_beta(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db > 21.0)
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  return 0.0;
}

/// Odd tap count meeting `attenuation_db` across a transition of `width_hz`.
inline std::size_t kaiser_length(double attenuation_db, double width_hz, double fs) {
  const double dw = 2.0 * std::numbers::pi * width_hz / fs;
  auto n = static_cast<std::size_t>(std::ceil((attenuation_db - 7.95) / (2.285 * dw))) + 1;
  return n | 1u;
}

inline std::vector<double> kaiser_window(std::size_t n, double beta) {
  std::vector<double> w(n);
  const double denom = std::cyl_bessel_i(0.0, beta);
  const double m = static_cast<double>(n - 1) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = m > 0 ? (static_cast<double>(i) - m) / m : 0.0;
    w[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
  }
  return w;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// Ideal low-pass (-6 dB point at cutoff_hz) shaped by a Kaiser window.
inline std::vector<double> windowed_lowpass(double cutoff_hz, double fs, std::size_t taps,
                                            double beta) {
  const auto w = kaiser_window(taps, beta);
  const double fc = cutoff_hz / fs;
  const double m = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  for (std::size_t i = 0; i < taps; ++i)
    h[i] = 2.0 * fc * sinc(2.0 * fc * (static_cast<double>(i) - m)) * w[i];
  return h;
}

/// Complex frequency response of a centred (zero-phase) FIR at frequency f.
inline std::complex<double> response(std::span<const double> h, double f_hz, double fs) {
  const double m = static_cast<double>(h.size() - 1) / 2.0;
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double phase = -2.0 * std::numbers::pi * f_hz / fs * (static_cast<double>(i) - m);
    acc += h[i] * std::polar(1.0, phase);
  }
  return acc;
}

/// Reflect index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

/// Centred convolution with an odd-length symmetric FIR: zero phase, output
/// aligned sample-for-sample with the input. Edges are reflect-padded.
inline std::vector<double> apply_zero_phase(std::span<const double> x, std::span<const double> h) {
  require(h.size() % 2 == 1, "zero-phase FIR needs an odd number of taps");
  const auto n = x.size();
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  std::vector<double> y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const auto src = reflect_index(static_cast<std::ptrdiff_t>(t) - k, n);
      acc += h[static_cast<std::size_t>(k + half)] * x[src];
    }
    y[t] = acc;
  }
  return y;
}

/// Anti-alias filter for decimation by `factor`: -6 dB at 0.5 * (fs/factor),
/// at least 50 dB of rejection from 0.6 * (fs/factor) upwards.
inline std::vector<double> decimation_filter(std::size_t factor, double fs) {
  const double target = fs / static_cast<double>(factor);
  constexpr double atten = 50.0;
  const double width = 0.2 * target;
  const auto taps = kaiser_length(atten, width, fs);
  auto h = windowed_lowpass(0.5 * target, fs, taps, kaiser_beta(atten));
  double dc = 0.0;
  for (double v : h) dc += v;
  for (double& v : h) v /= dc;
  return h;
}

/// Transition width used for a stop band [f_lo, f_hi]: it never eats into
/// DC, Nyquist, or more than the stop band's own width.
inline double bandstop_transition(double f_lo, double f_hi, double fs) {
  return std::min({f_lo, 0.5 * fs - f_hi, f_hi - f_lo, 0.02 * fs});
}

/// Band-stop whose full rejection covers [f_lo, f_hi]; pass bands start one
/// transition width outside the band.
inline std::vector<double> bandstop_filter(double f_lo, double f_hi, double fs) {
  constexpr double atten = 50.0;
  const double tw = bandstop_transition(f_lo, f_hi, fs);
  const auto taps = kaiser_length(atten, tw, fs);
  const double beta = kaiser_beta(atten);
  const auto lo = windowed_lowpass(f_lo - 0.5 * tw, fs, taps, beta);
  const auto hi = windowed_lowpass(f_hi + 0.5 * tw, fs, taps, beta);
  std::vector<double> h(taps);
  for (std::size_t i = 0; i < taps; ++i) h[i] = -(hi[i] - lo[i]);
  h[taps / 2] += 1.0;
  return h;
}

}  // namespace mfcausal::fir
