#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "nex/error.hpp"
#include "nex/random.hpp"

namespace nex {

inline constexpr double kVarianceFloor = 1e-6;

// Gaussian emission parameters for the explore (E) and exploit (X) states.
// mean_explore >= mean_exploit always holds.
struct EmissionParams {
  double mean_explore = 0.0;
  double var_explore = 1.0;
  double mean_exploit = 0.0;
  double var_exploit = 1.0;
};

struct GmmOptions {
  std::uint64_t seed = 0;
  int max_iter = 200;
  double tol = 1e-6;
};

inline double gaussian_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

namespace detail {

struct Mixture2 {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> var{1.0, 1.0};
};

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// k-means++ seeding followed by Lloyd iterations; returns hard-cluster
// moments as the EM starting point.
inline Mixture2 kmeans_init(std::span<const double> z, std::uint64_t seed) {
  const std::size_t n = z.size();
  Rng rng(seed);
  std::array<double, 2> center{};
  center[0] = z[rng.index(n)];

  double total = 0.0;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = (z[i] - center[0]) * (z[i] - center[0]);
    total += d2[i];
  }
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t pick = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    acc += d2[i];
    if (acc > target && d2[i] > 0.0) {
      pick = i;
      break;
    }
  }
  // Guard against accumulated rounding landing on a zero-distance point.
  if (d2[pick] == 0.0)
    for (std::size_t i = 0; i < n; ++i)
      if (d2[i] > 0.0) pick = i;
  center[1] = z[pick];

  std::vector<int> label(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = std::abs(z[i] - center[1]) < std::abs(z[i] - center[0]) ? 1 : 0;
      if (l != label[i]) changed = true;
      label[i] = l;
    }
    std::array<double, 2> sum{};
    std::array<std::size_t, 2> count{};
    for (std::size_t i = 0; i < n; ++i) {
      sum[label[i]] += z[i];
      ++count[label[i]];
    }
    for (int c = 0; c < 2; ++c)
      if (count[c] > 0) center[c] = sum[c] / static_cast<double>(count[c]);
    if (!changed && iter > 0) break;
  }

  Mixture2 mix;
  std::array<double, 2> sq{};
  std::array<std::size_t, 2> count{};
  for (std::size_t i = 0; i < n; ++i) {
    const double d = z[i] - center[label[i]];
    sq[label[i]] += d * d;
    ++count[label[i]];
  }
  for (int c = 0; c < 2; ++c) {
    mix.mean[c] = center[c];
    mix.weight[c] = std::max(static_cast<double>(count[c]), 1.0) / static_cast<double>(n);
    mix.var[c] = count[c] > 0 ? std::max(sq[c] / static_cast<double>(count[c]), kVarianceFloor) : 1.0;
  }
  const double wsum = mix.weight[0] + mix.weight[1];
  mix.weight[0] /= wsum;
  mix.weight[1] /= wsum;
  return mix;
}

}  // namespace detail

// Two-component 1-D Gaussian mixture fitted by EM, returned as emission
// parameters with the larger-mean component labelled explore. Equal means
// keep component 0 as explore.
inline EmissionParams init_emissions(std::span<const double> z, const GmmOptions& options = {}) {
  if (z.size() < 2) throw Error(ErrorKind::DegenerateSeries, "need at least 2 observations");
  if (std::all_of(z.begin(), z.end(), [&](double v) { return v == z.front(); }))
    throw Error(ErrorKind::DegenerateSeries, "all observations identical");

  const std::size_t n = z.size();
  detail::Mixture2 mix = detail::kmeans_init(z, options.seed);
  std::vector<std::array<double, 2>> resp(n);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < options.max_iter; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l0 = std::log(mix.weight[0]) + gaussian_log_pdf(z[i], mix.mean[0], mix.var[0]);
      const double l1 = std::log(mix.weight[1]) + gaussian_log_pdf(z[i], mix.mean[1], mix.var[1]);
      const double norm = detail::log_sum_exp(l0, l1);
      resp[i] = {std::exp(l0 - norm), std::exp(l1 - norm)};
      ll += norm;
    }
    ll /= static_cast<double>(n);

    for (int c = 0; c < 2; ++c) {
      double nk = 0.0;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i][c];
        sum += resp[i][c] * z[i];
      }
      // A starved component keeps its previous parameters.
      if (nk < 1e-10) continue;
      const double mean = sum / nk;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += resp[i][c] * (z[i] - mean) * (z[i] - mean);
      mix.mean[c] = mean;
      mix.var[c] = std::max(sq / nk, kVarianceFloor);
      mix.weight[c] = nk / static_cast<double>(n);
    }
    const double wsum = mix.weight[0] + mix.weight[1];
    mix.weight[0] /= wsum;
    mix.weight[1] /= wsum;

    if (std::abs(ll - prev_ll) < options.tol) break;
    prev_ll = ll;
  }

  const int explore = mix.mean[1] > mix.mean[0] ? 1 : 0;
  const int exploit = 1 - explore;
  return {mix.mean[explore], mix.var[explore], mix.mean[exploit], mix.var[exploit]};
}

}  // namespace nex
