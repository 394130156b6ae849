#pragma once

#include <span>
#include <vector>

#include "nex/cache.hpp"
#include "nex/stats.hpp"

namespace nex {

struct BaselineScores {
  std::size_t length = 0;
  double hes = 0.0;             // summed token entropy, nats
  double top20_fraction = 0.0;  // rows at or above the 80th percentile row entropy
  double mean_logprob = 0.0;
};

inline double entropy_sum(const TraceCache& cache) {
  double sum = 0.0;
  for (const auto& t : cache.tokens) {
    if (!t.entropy) throw Error(ErrorKind::MissingEntropy, "token " + std::to_string(t.position) + " has no entropy");
    sum += *t.entropy;
  }
  return sum;
}

// Row entropy is the mean token entropy of the row; the threshold is the
// linearly interpolated 80th percentile over rows.
inline double top20_entropy_fraction(const TraceCache& cache) {
  if (cache.tokens.empty()) throw Error(ErrorKind::EmptyTrace, "trace " + cache.trace_id + " has no tokens");
  std::vector<double> rows;
  for (std::size_t begin = 0; begin < cache.tokens.size(); begin += cache.row_width) {
    const std::size_t end = std::min(begin + cache.row_width, cache.tokens.size());
    double sum = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      const auto& e = cache.tokens[t].entropy;
      if (!e) throw Error(ErrorKind::MissingEntropy, "token " + std::to_string(t) + " has no entropy");
      sum += *e;
    }
    rows.push_back(sum / static_cast<double>(end - begin));
  }
  const double threshold = stats::percentile(rows, 0.8);
  std::size_t above = 0;
  for (double e : rows)
    if (e >= threshold) ++above;
  return static_cast<double>(above) / static_cast<double>(rows.size());
}

inline double mean_logprob(const TraceCache& cache) {
  if (cache.tokens.empty()) throw Error(ErrorKind::EmptyTrace, "trace " + cache.trace_id + " has no tokens");
  double sum = 0.0;
  for (const auto& t : cache.tokens) {
    if (!t.logprob) throw Error(ErrorKind::MissingLogprob, "token " + std::to_string(t.position) + " has no logprob");
    sum += *t.logprob;
  }
  return sum / static_cast<double>(cache.tokens.size());
}

inline BaselineScores compute_baselines(const TraceCache& cache) {
  BaselineScores b;
  b.length = cache.tokens.size();
  b.hes = entropy_sum(cache);
  b.top20_fraction = top20_entropy_fraction(cache);
  b.mean_logprob = mean_logprob(cache);
  return b;
}

}  // namespace nex
