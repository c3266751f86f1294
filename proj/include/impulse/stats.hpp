#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "impulse/errors.hpp"

namespace impulse {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// z-score for a two-sided 99% interval.
inline constexpr double kZ99 = 2.5758293035489004;

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n,
                                double z = kZ99) {
  if (n == 0) throw numeric_error("wilson_interval: n must be positive");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {center - half, center + half};
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw estimation_error("sample_variance: need >= 2 values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Jarque-Bera normality statistic; ~chi2(2) under the null.
// 99% critical value is 9.21.
inline double jarque_bera(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 8) throw estimation_error("jarque_bera: need >= 8 samples");
  const double m = mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double nn = static_cast<double>(n);
  m2 /= nn;
  m3 /= nn;
  m4 /= nn;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2) - 3.0;
  return nn / 6.0 * (skew * skew + kurt * kurt / 4.0);
}

inline constexpr double kJarqueBeraCrit99 = 9.21;

// Two-sided Kolmogorov-Smirnov distance between the sample and a reference
// CDF. Sorts a copy of the sample.
template <typename Cdf>
double ks_statistic(std::span<const double> sample, Cdf&& cdf) {
  if (sample.empty()) throw estimation_error("ks_statistic: empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

// Asymptotic KS critical value at significance alpha = 0.01.
inline double ks_critical_001(std::size_t n) {
  return 1.628 / std::sqrt(static_cast<double>(n));
}

// FNV-1a 64-bit hash; used to fingerprint configs in output headers.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace impulse
