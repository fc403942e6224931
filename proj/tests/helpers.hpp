#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mfcausal/timeseries.hpp"

namespace testutil {

inline std::vector<double> white(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline std::vector<double> tone(std::size_t n, double f, double fs, double amp = 1.0, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k)
    v[k] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(k) / fs + phase);
  return v;
}

inline double rms(const std::vector<double>& v, std::size_t lo = 0, std::size_t hi = 0) {
  if (hi == 0) hi = v.size();
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i] * v[i];
  return std::sqrt(s / static_cast<double>(hi - lo));
}

inline double corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mfcausal::mean_of(a), mb = mfcausal::mean_of(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline Eigen::MatrixXcd random_block(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng, bool complex) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd M(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) M(i, j) = {g(rng), complex ? g(rng) : 0.0};
  return M;
}

/// AR(1) trial of length n.
inline std::vector<double> ar1(std::size_t n, double a, std::uint64_t seed) {
  auto e = white(n + 500, seed);
  std::vector<double> x(n + 500, 0.0);
  for (std::size_t t = 1; t < x.size(); ++t) x[t] = a * x[t - 1] + e[t];
  return {x.begin() + 500, x.end()};
}

}  // namespace testutil
