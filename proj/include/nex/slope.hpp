#pragma once

#include <cmath>
#include <span>
#include <unordered_set>
#include <vector>

#include "nex/cache.hpp"
#include "nex/stats.hpp"

namespace nex {

// Token-normalized count of neurons that first appear in each row.
inline std::vector<double> novelty_slopes(std::span<const Row> rows) {
  std::vector<double> slopes;
  slopes.reserve(rows.size());
  std::unordered_set<NeuronKey, NeuronKeyHash> seen;
  for (const auto& row : rows) {
    std::size_t fresh = 0;
    for (const auto& a : row.masses)
      if (seen.insert(a.key).second) ++fresh;
    const std::size_t width = row.token_count();
    slopes.push_back(width > 0 ? static_cast<double>(fresh) / static_cast<double>(width) : 0.0);
  }
  return slopes;
}

inline constexpr double kStandardizeEpsilon = 1e-12;

struct SlopeSeries {
  std::vector<double> raw;        // s_r
  std::vector<double> processed;  // z_r
  double trend_intercept = 0.0;
  double trend_slope = 0.0;
  double location = 0.0;  // median of residuals
  double scale = 0.0;     // MAD of residuals

  std::size_t size() const { return raw.size(); }
};

struct Detrended {
  stats::LinearFit fit;
  std::vector<double> residuals;
};

// Residuals of y against a + b*log(1 + r), r the 0-based row index.
inline Detrended detrend(std::span<const double> y) {
  Detrended out;
  if (y.size() == 1) {
    out.fit.intercept = y[0];
    out.residuals = {0.0};
    return out;
  }
  std::vector<double> x(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) x[r] = std::log1p(static_cast<double>(r));
  out.fit = stats::least_squares(x, y);
  out.residuals.resize(y.size());
  for (std::size_t r = 0; r < y.size(); ++r) out.residuals[r] = y[r] - (out.fit.intercept + out.fit.slope * x[r]);
  return out;
}

// log1p, detrend, then robust standardization. A MAD at or below the
// epsilon (rounding noise of a flat series) maps every row to 0.
inline SlopeSeries preprocess(std::span<const double> slopes) {
  if (slopes.empty()) throw Error(ErrorKind::EmptyTrace, "slope series is empty");
  SlopeSeries series;
  series.raw.assign(slopes.begin(), slopes.end());

  std::vector<double> logged(slopes.size());
  for (std::size_t r = 0; r < slopes.size(); ++r) logged[r] = std::log1p(slopes[r]);

  const Detrended d = detrend(logged);
  series.trend_intercept = d.fit.intercept;
  series.trend_slope = d.fit.slope;
  series.location = stats::median(d.residuals);
  series.scale = stats::mad(d.residuals, series.location);

  series.processed.assign(slopes.size(), 0.0);
  if (series.scale > kStandardizeEpsilon) {
    for (std::size_t r = 0; r < slopes.size(); ++r)
      series.processed[r] = (d.residuals[r] - series.location) / (series.scale + kStandardizeEpsilon);
  }
  return series;
}

}  // namespace nex
