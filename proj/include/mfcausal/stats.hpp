#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mfcausal/core.hpp"
#include "mfcausal/timeseries.hpp"

namespace mfcausal::stats {

struct TestResult {
  double statistic = 0.0;
  double p = 1.0;
};

/// Welch two-sample t test, one-sided alternative mean(a) > mean(b).
inline TestResult welch_t_greater(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, "t test needs at least 2 values per sample");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = variance_of(a) / static_cast<double>(a.size());
  const double vb = variance_of(b) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (!(se2 > 0.0)) return {0.0, ma > mb ? 0.0 : 1.0};
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 /
                    (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(df);
  return {t, boost::math::cdf(boost::math::complement(dist, t))};
}

/// Paired t test, one-sided alternative mean(a - b) > 0.
inline TestResult paired_t_greater(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "paired t test needs equal samples of size >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double se = std::sqrt(variance_of(d) / static_cast<double>(d.size()));
  const double m = mean_of(d);
  if (!(se > 0.0)) return {0.0, m > 0.0 ? 0.0 : 1.0};
  const double t = m / se;
  boost::math::students_t dist(static_cast<double>(d.size() - 1));
  return {t, boost::math::cdf(boost::math::complement(dist, t))};
}

/// Kolmogorov survival function Q(x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2).
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Largest gap F_b(t) - F_a(t) (one-sided) and max |F_a - F_b| (two-sided).
inline std::pair<double, double> ks_statistics(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d_plus = 0.0, d_abs = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double t;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      t = sa[i];
    else
      t = sb[j];
    while (i < sa.size() && sa[i] <= t) ++i;
    while (j < sb.size() && sb[j] <= t) ++j;
    const double fa = static_cast<double>(i) / na, fb = static_cast<double>(j) / nb;
    d_plus = std::max(d_plus, fb - fa);
    d_abs = std::max(d_abs, std::abs(fa - fb));
  }
  return {d_plus, d_abs};
}

/// Two-sample Kolmogorov-Smirnov test, one-sided alternative that `a` is
/// stochastically larger than `b`. Asymptotic p = exp(-2 lambda^2) with the
/// effective-size correction lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) D.
inline TestResult ks_greater(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 5 && b.size() >= 5, "KS test needs at least 5 values per sample");
  const double d = ks_statistics(a, b).first;
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return {d, d <= 0.0 ? 1.0 : std::min(1.0, std::exp(-2.0 * lam * lam))};
}

/// Two-sided two-sample KS test via the Kolmogorov distribution.
inline TestResult ks_two_sided(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 5 && b.size() >= 5, "KS test needs at least 5 values per sample");
  const double d = ks_statistics(a, b).second;
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return {d, kolmogorov_q(lam)};
}

/// One-sample KS test against the uniform distribution on (0, 1).
inline TestResult ks_uniform(std::span<const double> x) {
  require(x.size() >= 5, "KS test needs at least 5 values");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  return {d, kolmogorov_q(lam)};
}

/// Benjamini-Hochberg adjusted p-values (step-up, capped at 1).
inline std::vector<double> bh_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(r + 1));
    out[i] = std::min(1.0, running);
  }
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Student-t 95% confidence interval for the mean.
inline Interval mean_ci95(std::span<const double> x) {
  require(x.size() >= 2, "confidence interval needs at least 2 values");
  const double m = mean_of(x);
  const double se = std::sqrt(variance_of(x) / static_cast<double>(x.size()));
  boost::math::students_t dist(static_cast<double>(x.size() - 1));
  const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
  return {m - q * se, m + q * se};
}

/// Linear-interpolated sample quantile, q in [0, 1].
inline double quantile(std::span<const double> x, double q) {
  require(!x.empty(), "quantile of an empty sample");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (pos - static_cast<double>(i)) * (s[i + 1] - s[i]);
}

}  // namespace mfcausal::stats
