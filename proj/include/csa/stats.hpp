#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace csa {

/// Order statistic number floor(q * n) + 1 (1-based) of an ascending sample,
/// clamped to the sample. Deterministic, no interpolation.
inline double quantile_sorted(std::span<const double> ascending, double q) {
  const std::size_t n = ascending.size();
  const auto rank = static_cast<std::size_t>(std::floor(q * static_cast<double>(n)));
  return ascending[std::min(rank, n - 1)];
}

inline double quantile(std::vector<double> sample, double q) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, q);
}

inline double mean(std::span<const double> v) {
  double sum = 0.0;
  for (const double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace csa
