#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nex/cache.hpp"
#include "nex/credit.hpp"

namespace nex {

// Response-level activation mass b_k, ascending by key.
struct ResponseSummary {
  std::string trace_id;
  std::string prompt_id;
  std::string model_id;
  std::vector<Activation> mass;
};

inline ResponseSummary summarize(const TraceCache& cache) {
  return {cache.trace_id, cache.prompt_id, cache.model_id, sum_by_key(cache.tokens)};
}

struct ScoreRecord {
  double score = 0.0;
  double reward = 0.0;
  double bad = 0.0;
  double pos_mass = 0.0;
  double abs_mass = 0.0;
  double tot_mass = 0.0;
};

// Good-mass fraction: share of weight-credible mass on positively weighted
// neurons. Neurons without a weight count as w = 0.
inline ScoreRecord score_response(const ResponseSummary& summary, const NeuronWeights& weights) {
  ScoreRecord rec;
  for (const auto& a : summary.mass) {
    const double w = weights.weight(a.key);
    rec.pos_mass += a.mass * std::max(w, 0.0);
    rec.abs_mass += a.mass * std::abs(w);
    rec.tot_mass += a.mass;
  }
  if (rec.abs_mass > 0.0) rec.score = rec.pos_mass / rec.abs_mass;
  if (rec.tot_mass > 0.0) {
    rec.reward = rec.pos_mass / rec.tot_mass;
    rec.bad = (rec.abs_mass - rec.pos_mass) / rec.tot_mass;
  }
  return rec;
}

struct ScoredResponse {
  std::string prompt_id;
  std::string trace_id;
  std::string model_id;
  ScoreRecord record;
};

struct PromptScore {
  std::string prompt_id;
  double score = 0.0;
  std::size_t runs = 0;
};

struct ModelScore {
  double mean = 0.0;
  std::vector<PromptScore> per_prompt;  // ascending prompt id
};

// Runs are averaged within a prompt first, then prompts are averaged. Sums
// run in (prompt id, trace id) order so input order does not matter.
inline ModelScore aggregate_scores(std::span<const ScoredResponse> scored) {
  if (scored.empty()) throw Error(ErrorKind::EmptySet, "no responses to aggregate");
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& s : scored) grouped[s.prompt_id][s.trace_id].push_back(s.record.score);

  ModelScore out;
  double total = 0.0;
  for (const auto& [prompt, traces] : grouped) {
    double sum = 0.0;
    std::size_t runs = 0;
    for (const auto& [_, scores] : traces)
      for (double v : scores) {
        sum += v;
        ++runs;
      }
    const double mean = sum / static_cast<double>(runs);
    out.per_prompt.push_back({prompt, mean, runs});
    total += mean;
  }
  out.mean = total / static_cast<double>(out.per_prompt.size());
  return out;
}

inline ScoredResponse score_summary(const ResponseSummary& s, const NeuronWeights& weights) {
  return {s.prompt_id, s.trace_id, s.model_id, score_response(s, weights)};
}

inline ModelScore score_model(std::span<const ResponseSummary> summaries, const NeuronWeights& weights) {
  if (summaries.empty()) throw Error(ErrorKind::EmptySet, "no responses to score");
  std::vector<ScoredResponse> scored;
  scored.reserve(summaries.size());
  for (const auto& s : summaries) scored.push_back(score_summary(s, weights));
  return aggregate_scores(scored);
}

struct RankedSample {
  std::string id;
  double score = 0.0;

  friend bool operator==(const RankedSample&, const RankedSample&) = default;
};

// Descending score, ascending id among equal scores.
inline void sort_ranked(std::vector<RankedSample>& samples) {
  std::stable_sort(samples.begin(), samples.end(), [](const RankedSample& a, const RankedSample& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
}

// Scores a curation pool. The weights must come from a disjoint mini-set.
inline std::vector<RankedSample> score_data(std::span<const ResponseSummary> pool, const NeuronWeights& weights,
                                            const std::string& pool_id = {}) {
  if (!pool_id.empty() && pool_id == weights.miniset_id)
    throw Error(ErrorKind::MinisetOverlap, "pool id equals the weights' mini-set id \"" + pool_id + "\"");
  const std::set<std::string> miniset(weights.source_traces.begin(), weights.source_traces.end());
  std::vector<RankedSample> ranked;
  ranked.reserve(pool.size());
  for (const auto& s : pool) {
    if (miniset.count(s.trace_id))
      throw Error(ErrorKind::MinisetOverlap, "trace \"" + s.trace_id + "\" was used to learn the weights");
    ranked.push_back({s.trace_id, score_response(s, weights).score});
  }
  sort_ranked(ranked);
  return ranked;
}

// floor(fraction * n); the tolerance absorbs representation error such as
// 0.3 * 10 = 2.9999999999999996.
inline std::size_t retained_count(std::size_t n, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorKind::InvalidArgument, "fraction must lie in [0, 1]");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

inline std::vector<RankedSample> curate(std::vector<RankedSample> samples, double fraction) {
  sort_ranked(samples);
  samples.resize(retained_count(samples.size(), fraction));
  return samples;
}

}  // namespace nex
