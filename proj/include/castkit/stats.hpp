#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace castkit::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty set");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Linear interpolation between closest ranks (the "type 7" estimator).
/// `q` in [0, 1]. Takes a copy because it sorts.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(xs.begin(), xs.end());
  const double h = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct BoxStats {
  std::size_t n = 0;
  double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

inline BoxStats box(const std::vector<double>& xs) {
  BoxStats b;
  b.n = xs.size();
  b.mean = mean(xs);
  b.median = quantile(xs, 0.5);
  b.q1 = quantile(xs, 0.25);
  b.q3 = quantile(xs, 0.75);
  auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  b.min = *lo;
  b.max = *hi;
  return b;
}

}  // namespace castkit::stats
