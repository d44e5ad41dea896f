#pragma once

// Series form of the von Mises CDF on [-pi, pi] (mean 0) and a
// Kolmogorov-Smirnov statistic against it. Test-only.

#include <algorithm>
#include <cmath>
#include <vector>

namespace radloc::oracle {

inline double von_mises_cdf(double x, double kappa) {
  constexpr double pi = 3.14159265358979323846;
  double acc = (x + pi) / (2.0 * pi);
  if (kappa == 0.0) return acc;
  // I_p(kappa)/I_0(kappa) through exponentially scaled values to avoid overflow.
  const double i0 = std::cyl_bessel_i(0.0, kappa);
  double sum = 0.0;
  for (int p = 1; p < 2000; ++p) {
    const double ratio = std::cyl_bessel_i(static_cast<double>(p), kappa) / i0;
    sum += ratio * std::sin(p * x) / p;
    if (ratio < 1e-17) break;
  }
  acc += sum / pi;
  return std::clamp(acc, 0.0, 1.0);
}

inline double ks_statistic(std::vector<double> samples, double kappa) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = von_mises_cdf(samples[i], kappa);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace radloc::oracle
