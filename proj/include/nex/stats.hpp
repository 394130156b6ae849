#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "nex/error.hpp"

namespace nex::stats {

// Even-length inputs return the mean of the two middle order statistics.
inline double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptySet, "median of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

// Unscaled median absolute deviation around `center`.
inline double mad(std::span<const double> values, double center) {
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - center));
  return median(dev);
}

// Linear-interpolation percentile, q in [0, 1].
inline double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::EmptySet, "percentile of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptySet, "mean of empty sequence");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};

// Ordinary least squares y ~ intercept + slope * x. A constant regressor
// yields slope 0 and the mean of y as intercept.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw Error(ErrorKind::InvalidArgument, "least_squares needs equal-length nonempty inputs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace nex::stats
