#include "catch_amalgamated.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "mfcausal/spectral.hpp"

using namespace mfcausal;
using Catch::Approx;

namespace {

// Naive DFT of one windowed segment, the oracle for stft columns.
std::complex<double> dft_bin(const std::vector<double>& x, std::size_t start, std::size_t n,
                             const std::vector<double>& w, std::size_t k) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n);
    acc += x[start + i] * w[i] * std::polar(1.0, ang);
  }
  return acc;
}

}  // namespace

TEST_CASE("stft matches a direct DFT frame by frame", "[spectral]") {
  const auto x = testutil::white(300, 21);
  TimeSeries ts(x, 100.0);
  STFTConfig cfg{0.2, 0.05, WindowFn::hann};
  const auto S = stft(ts, cfg);
  REQUIRE(S.window_samples == 20);
  REQUIRE(S.hop_samples == 5);
  REQUIRE(S.n_frames() == (300 - 20) / 5 + 1);
  REQUIRE(S.n_freqs() == 11);
  const auto w = make_window(20, WindowFn::hann);
  for (std::size_t j : {0u, 7u, 56u})
    for (std::size_t k = 0; k < 11; ++k) {
      const auto ref = dft_bin(x, j * 5, 20, w, k);
      const auto got = S.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      REQUIRE(std::abs(got - ref) < 1e-10);
    }
  REQUIRE(S.frame_times[0] == Approx(0.095));
  REQUIRE(S.freqs[1] == Approx(5.0));
}

TEST_CASE("an on-bin tone concentrates in one bin", "[spectral]") {
  const double fs = 64.0;
  TimeSeries ts(testutil::tone(256, 8.0, fs), fs);
  const auto S = stft(ts, {0.5, 0.0, WindowFn::rectangular});
  REQUIRE(S.n_frames() == 256 - 32 + 1);
  for (std::size_t j = 0; j < S.n_frames(); j += 17) {
    for (std::size_t k = 0; k < S.n_freqs(); ++k) {
      const double mag = std::abs(S.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
      if (k == 4)
        REQUIRE(mag == Approx(16.0).epsilon(1e-9));
      else
        REQUIRE(mag < 1e-9);
    }
  }
}

TEST_CASE("a constant with a rectangular window lands in DC only", "[spectral]") {
  TimeSeries ts(std::vector<double>(50, 2.0), 10.0);
  const auto S = stft(ts, {1.0, 0.0, WindowFn::rectangular});
  for (Eigen::Index j = 0; j < S.values.rows(); ++j) {
    REQUIRE(std::abs(S.values(j, 0) - std::complex<double>(20.0, 0.0)) < 1e-10);
    for (Eigen::Index k = 1; k < S.values.cols(); ++k) REQUIRE(std::abs(S.values(j, k)) < 1e-10);
  }
}

TEST_CASE("stft is linear and satisfies Parseval per frame", "[spectral]") {
  const auto a = testutil::white(200, 1), b = testutil::white(200, 2);
  std::vector<double> c(200);
  for (std::size_t i = 0; i < 200; ++i) c[i] = 2.0 * a[i] - 0.5 * b[i];
  STFTConfig cfg{0.32, 0.1, WindowFn::hann};
  const auto Sa = stft(TimeSeries(a, 100.0), cfg), Sb = stft(TimeSeries(b, 100.0), cfg);
  const auto Sc = stft(TimeSeries(c, 100.0), cfg);
  REQUIRE((Sc.values - (2.0 * Sa.values - 0.5 * Sb.values)).cwiseAbs().maxCoeff() < 1e-10);

  const std::size_t n = Sa.window_samples;  // 32: DC and Nyquist are single bins
  const auto w = make_window(n, cfg.window);
  for (std::size_t j = 0; j < Sa.n_frames(); ++j) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = a[j * Sa.hop_samples + i] * w[i];
      time_energy += v * v;
    }
    double freq_energy = 0.0;
    for (std::size_t k = 0; k < Sa.n_freqs(); ++k) {
      const double m2 = std::norm(Sa.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
      freq_energy += (k == 0 || k == n / 2) ? m2 : 2.0 * m2;
    }
    REQUIRE(freq_energy / static_cast<double>(n) == Approx(time_energy).epsilon(1e-10));
  }
}

TEST_CASE("stft rejects bad windows", "[spectral]") {
  TimeSeries ts(testutil::white(10, 1), 100.0);
  REQUIRE_THROWS_AS(stft(ts, {0.2, 0.0, WindowFn::hann}), InvalidArgument);
  REQUIRE_THROWS_AS(stft(ts, {0.01, 0.0, WindowFn::hann}), InvalidArgument);
  REQUIRE_THROWS_AS(stft(ts, {0.05, 0.1, WindowFn::hann}), InvalidArgument);
}

TEST_CASE("per-frequency zscore normalizes each bin", "[spectral]") {
  const auto S = stft(TimeSeries(testutil::white(400, 4), 100.0), {0.2, 0.0, WindowFn::hann});
  const auto Z = zscore_per_frequency(S);
  REQUIRE(Z.degenerate_bins.empty());
  const auto& v = Z.spec.values;
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    REQUIRE(std::abs(v.col(k).mean()) < 1e-12);
    REQUIRE(v.col(k).squaredNorm() / static_cast<double>(v.rows() - 1) == Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("per-frequency zscore zeroes and reports flat bins", "[spectral]") {
  Spectrogram S;
  S.values = Eigen::MatrixXcd::Ones(6, 2);
  S.values.col(1) << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const auto Z = zscore_per_frequency(S);
  REQUIRE(Z.degenerate_bins == std::vector<std::size_t>{0});
  REQUIRE(Z.spec.values.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("magnitude takes the modulus", "[spectral]") {
  Spectrogram S;
  S.values.resize(1, 2);
  S.values(0, 0) = {3.0, 4.0};
  S.values(0, 1) = {0.0, -2.0};
  const auto M = magnitude(S);
  REQUIRE(M.is_real);
  REQUIRE(M.values(0, 0) == std::complex<double>(5.0, 0.0));
  REQUIRE(M.values(0, 1) == std::complex<double>(2.0, 0.0));
}

TEST_CASE("select_bins keeps requested columns and freqs", "[spectral]") {
  const auto S = stft(TimeSeries(testutil::white(100, 9), 100.0), {0.1, 0.0, WindowFn::hann});
  const auto T = select_bins(S, {1, 3});
  REQUIRE(T.n_freqs() == 2);
  REQUIRE(T.freqs == std::vector<double>{S.freqs[1], S.freqs[3]});
  REQUIRE((T.values.col(1) - S.values.col(3)).norm() == 0.0);
}

TEST_CASE("bandstop removes an in-band tone and keeps an out-of-band one", "[spectral]") {
  const double fs = 500.0;
  const std::size_t n = 10000;
  const auto inband = testutil::tone(n, 40.0, fs);
  const auto outband = testutil::tone(n, 10.0, fs);
  const auto a = bandstop(TimeSeries(inband, fs), 30.0, 50.0);
  const auto b = bandstop(TimeSeries(outband, fs), 30.0, 50.0);
  const std::size_t lo = 1000, hi = n - 1000;
  REQUIRE(20.0 * std::log10(testutil::rms(a.values(), lo, hi) / std::sqrt(0.5)) < -45.0);
  REQUIRE(testutil::rms(b.values(), lo, hi) == Approx(std::sqrt(0.5)).epsilon(0.01));
  REQUIRE_THROWS_AS(bandstop(TimeSeries(inband, fs), 50.0, 30.0), InvalidArgument);
}

TEST_CASE("psd integrates to the variance of white noise", "[spectral]") {
  const double fs = 200.0;
  const auto x = testutil::white(40000, 13, 2.0);
  const auto P = psd(TimeSeries(x, fs), 1.0);
  double area = 0.0;
  const double df = P.freqs[1] - P.freqs[0];
  for (double p : P.power) area += p * df;
  REQUIRE(area == Approx(4.0).epsilon(0.05));
  // Flat density: 4 / (fs / 2).
  REQUIRE(P.power[50] == Approx(4.0 / 100.0).epsilon(0.25));
}
