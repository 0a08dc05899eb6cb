#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace ssvae::testing {

// Upper 1% point of chi-square with `df` degrees of freedom (Wilson-Hilferty).
inline double chi2_critical_99(double df) {
  const double z = 2.326347874;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

// Pearson statistic after pooling neighbouring bins until each expects >= 5.
inline std::pair<double, double> chi2_statistic(const std::vector<double>& observed,
                                                const std::vector<double>& expected) {
  double stat = 0.0, o = 0.0, e = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += expected[i];
    if (e >= 5.0) {
      stat += (o - e) * (o - e) / e;
      ++cells;
      o = e = 0.0;
    }
  }
  if (e > 0.0) {
    stat += (o - e) * (o - e) / e;
    ++cells;
  }
  return {stat, static_cast<double>(cells) - 1.0};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov distance of a sample from the standard normal.
inline double ks_distance_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Critical KS distance at p = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  var /= (n - 1.0);
  return {m, std::sqrt(var / n)};
}

}  // namespace ssvae::testing
