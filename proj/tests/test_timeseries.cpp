#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "mfcausal/timeseries.hpp"

using namespace mfcausal;
using Catch::Approx;

TEST_CASE("decimating a constant keeps the constant", "[timeseries]") {
  TimeSeries ts(std::vector<double>(1000, 3.25), 1000.0);
  const auto out = lowpass_decimate(ts, 10);
  REQUIRE(out.size() == 100);
  REQUIRE(out.fs() == Approx(100.0));
  for (std::size_t k = 0; k < out.size(); ++k) REQUIRE(out[k] == Approx(3.25).margin(1e-9));
}

TEST_CASE("decimation passes low tones and rejects high ones", "[timeseries]") {
  const std::size_t n = 20000;
  const double fs = 1000.0;
  // Pass band: 1 Hz at 100 Hz output rate.
  {
    TimeSeries ts(testutil::tone(n, 1.0, fs), fs);
    const auto out = lowpass_decimate(ts, 10);
    const auto expect = testutil::tone(out.size(), 1.0, out.fs());
    const auto [lo, hi] = out.valid_range();
    for (std::size_t k = lo; k < hi; ++k) REQUIRE(out[k] == Approx(expect[k]).margin(5e-3));
  }
  // Stop band: 80 Hz would alias to 20 Hz; at least 50 dB down.
  {
    TimeSeries ts(testutil::tone(n, 80.0, fs), fs);
    const auto out = lowpass_decimate(ts, 10);
    const auto [lo, hi] = out.valid_range();
    const double r = testutil::rms(out.values(), lo, hi);
    REQUIRE(20.0 * std::log10(r / std::sqrt(0.5)) < -50.0);
  }
}

TEST_CASE("anti-alias filter response matches a direct DTFT", "[timeseries]") {
  const auto h = fir::decimation_filter(5, 500.0);
  REQUIRE(h.size() % 2 == 1);
  // Independent evaluation: symmetric taps give a purely real response
  // h_c + 2 sum h_{c+k} cos(w k).
  const std::size_t c = h.size() / 2;
  for (double f : {0.0, 10.0, 40.0, 50.0, 60.0, 120.0, 249.0}) {
    const double w = 2.0 * std::numbers::pi * f / 500.0;
    double real = h[c];
    for (std::size_t k = 1; k <= c; ++k) real += 2.0 * h[c + k] * std::cos(w * static_cast<double>(k));
    const auto got = fir::response(h, f, 500.0);
    REQUIRE(got.real() == Approx(real).margin(1e-12));
    REQUIRE(std::abs(got.imag()) < 1e-12);
    if (f <= 40.0) REQUIRE(std::abs(real - 1.0) < 0.01);
    if (f >= 60.0) REQUIRE(std::abs(real) < std::pow(10.0, -50.0 / 20.0));
  }
  REQUIRE(std::abs(fir::response(h, 50.0, 500.0).real() - 0.5) < 0.01);
}

TEST_CASE("decimation keeps the time origin and marks edges", "[timeseries]") {
  TimeSeries ts(testutil::white(2000, 1), 1000.0, 2.5);
  const auto out = lowpass_decimate(ts, 4);
  REQUIRE(out.t0() == 2.5);
  REQUIRE(out.edge() > 0);
  REQUIRE_THROWS_AS(lowpass_decimate(ts, 1), InvalidArgument);
}

TEST_CASE("linear detrend removes lines exactly", "[timeseries]") {
  std::vector<double> v(50);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 2.0 - 0.3 * static_cast<double>(k);
  const auto out = detrend_linear(TimeSeries(v, 1.0));
  for (double x : out.values()) REQUIRE(std::abs(x) < 1e-10);

  auto noise = testutil::white(200, 7);
  auto with_trend = noise;
  for (std::size_t k = 0; k < noise.size(); ++k) with_trend[k] += 5.0 + 0.01 * static_cast<double>(k);
  const auto a = detrend_linear(TimeSeries(noise, 1.0));
  const auto b = detrend_linear(TimeSeries(with_trend, 1.0));
  for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k] == Approx(b[k]).margin(1e-10));
}

TEST_CASE("zscore gives zero mean and unit variance", "[timeseries]") {
  const auto out = zscore(TimeSeries(testutil::white(500, 3, 4.0), 10.0));
  REQUIRE(std::abs(mean_of(out.samples())) < 1e-12);
  REQUIRE(variance_of(out.samples()) == Approx(1.0).epsilon(1e-12));
  REQUIRE_THROWS_AS(zscore(TimeSeries(std::vector<double>(20, 1.0), 1.0)), DegenerateInput);
}

TEST_CASE("lagged xcorr peaks at minus the lead of x", "[timeseries]") {
  const auto base = testutil::white(3000, 11);
  const std::size_t d = 7;
  std::vector<double> x(base.begin() + d, base.end());
  std::vector<double> y(base.begin(), base.end() - d);  // y(t) = x(t - d)
  TimeSeries tx(x, 100.0), ty(y, 100.0);
  const auto prof = lagged_xcorr(tx, ty, 0.2);
  const auto it = std::max_element(prof.values.begin(), prof.values.end());
  const double peak = prof.lags[static_cast<std::size_t>(it - prof.values.begin())];
  REQUIRE(peak == Approx(-0.07).margin(1e-9));
  REQUIRE(*it == Approx(1.0).margin(1e-9));

  // Swapping arguments mirrors the profile.
  const auto rev = lagged_xcorr(ty, tx, 0.2);
  REQUIRE(rev.lags.size() == prof.lags.size());
  for (std::size_t i = 0; i < prof.lags.size(); ++i) {
    const std::size_t j = prof.lags.size() - 1 - i;
    REQUIRE(rev.lags[j] == Approx(-prof.lags[i]).margin(1e-12));
    REQUIRE(rev.values[j] == Approx(prof.values[i]).margin(1e-12));
  }
}

TEST_CASE("lagged xcorr across rates uses the fine lag step", "[timeseries]") {
  const std::size_t n = 4000;
  const auto hf = testutil::white(n, 5);
  std::vector<double> lf(n / 4);
  // LF sample k equals the HF sample 3 steps earlier, so HF leads by 30 ms.
  for (std::size_t k = 1; k < lf.size(); ++k) lf[k] = hf[4 * k - 3];
  TimeSeries thf(hf, 100.0), tlf(lf, 25.0);
  const auto prof = lagged_xcorr(thf, tlf, 0.1);
  REQUIRE(prof.lags[1] - prof.lags[0] == Approx(0.01));
  const auto it = std::max_element(prof.values.begin(), prof.values.end());
  REQUIRE(prof.lags[static_cast<std::size_t>(it - prof.values.begin())] == Approx(-0.03).margin(1e-9));
}

TEST_CASE("MFPair validates rates and grid alignment", "[timeseries]") {
  auto trial = [](std::size_t n, double fs, double t0 = 0.0) {
    return MultiTrialSeries({TimeSeries(testutil::white(n, n), fs, t0)});
  };
  MFPair ok(trial(1000, 100.0), trial(200, 20.0, 0.03));
  REQUIRE(ok.ratio() == 5);
  REQUIRE(ok.offset() == 3);
  REQUIRE_THROWS_AS(MFPair(trial(1000, 100.0), trial(300, 30.0)), InvalidArgument);
  REQUIRE_THROWS_AS(MFPair(trial(1000, 100.0), trial(200, 20.0, 0.005)), InvalidArgument);
  REQUIRE_THROWS_AS(MFPair(trial(1000, 100.0), trial(100, 20.0)), InvalidArgument);
  REQUIRE_THROWS_AS(MultiTrialSeries({TimeSeries({1, 2, 3}, 1.0), TimeSeries({1, 2}, 1.0)}),
                    InvalidArgument);
  REQUIRE_THROWS_AS(TimeSeries({1.0, std::nan("")}, 1.0), InvalidArgument);
}
