#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mfcausal/core.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal {

struct SurrogateConfig {
  std::size_t n_reps = 100;
  std::uint64_t seed = 0;
  /// Reject n_reps outside [100, 500]; turn off for quick runs.
  bool enforce_range = true;

  void validate() const {
    require(n_reps >= 2, "at least 2 surrogate repetitions are required");
    if (enforce_range)
      require(n_reps >= 100 && n_reps <= 500, "surrogate repetitions must lie in [100, 500]");
  }
};

/// Fourier-transform surrogate: magnitudes kept, phases of every bin other
/// than DC and Nyquist drawn uniformly on [0, 2pi). DC and Nyquist keep their
/// original real values, so the mean is unchanged.
template <class Rng>
TimeSeries phase_randomize(const TimeSeries& ts, Rng& rng) {
  const std::size_t n = ts.size();
  require(n >= 4, "surrogate needs at least 4 samples");
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> F;
  std::vector<double> x(ts.samples().begin(), ts.samples().end());
  fft.fwd(F, x);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::complex<double>> G(n);
  G[0] = {F[0].real(), 0.0};
  const std::size_t half = (n - 1) / 2;
  for (std::size_t k = 1; k <= half; ++k) {
    G[k] = std::polar(std::abs(F[k]), phase(rng));
    G[n - k] = std::conj(G[k]);
  }
  if (n % 2 == 0) G[n / 2] = {F[n / 2].real(), 0.0};
  std::vector<double> y;
  fft.inv(y, G);
  y.resize(n);
  return ts.with_samples(std::move(y));
}

inline TimeSeries phase_randomize(const TimeSeries& ts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return phase_randomize(ts, rng);
}

}  // namespace mfcausal
