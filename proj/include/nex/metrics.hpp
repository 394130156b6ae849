#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nex/error.hpp"
#include "nex/random.hpp"
#include "nex/scoring.hpp"

namespace nex {

// Sample Pearson correlation.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::InvalidArgument, "pearson needs equal-length inputs");
  if (xs.size() < 2) throw Error(ErrorKind::ConstantInput, "pearson needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ConstantInput, "pearson input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// A model variant with its label-free score and externally measured accuracy
// in percentage points.
struct Candidate {
  std::string id;
  double score = 0.0;
  double accuracy = 0.0;
};

namespace detail {
// Candidates ordered by descending score, ties by ascending id.
inline std::vector<std::size_t> score_order(std::span<const Candidate> c) {
  std::vector<std::size_t> idx(c.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return c[a].score != c[b].score ? c[a].score > c[b].score : c[a].id < c[b].id;
  });
  return idx;
}

// Most accurate candidate, ties by ascending id.
inline std::size_t true_best(std::span<const Candidate> c) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (c[i].accuracy > c[best].accuracy || (c[i].accuracy == c[best].accuracy && c[i].id < c[best].id)) best = i;
  return best;
}
}  // namespace detail

// Accuracy lost by picking the top-scored candidate instead of the best one.
inline double regret_at_1(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::EmptySet, "no candidates");
  const auto order = detail::score_order(candidates);
  return candidates[detail::true_best(candidates)].accuracy - candidates[order.front()].accuracy;
}

// 1 if the most accurate candidate is among the k top-scored ones.
inline int hit_at_k(std::span<const Candidate> candidates, std::size_t k = 3) {
  if (candidates.empty()) throw Error(ErrorKind::EmptySet, "no candidates");
  const auto order = detail::score_order(candidates);
  const std::size_t best = detail::true_best(candidates);
  for (std::size_t rank = 0; rank < order.size() && rank < k; ++rank)
    if (order[rank] == best) return 1;
  return 0;
}

struct RankingReport {
  std::optional<double> pearson_r;  // empty when fewer than 2 points or constant input
  double regret_at_1 = 0.0;
  int hit_at_3 = 0;
  std::vector<Candidate> candidates;
};

inline RankingReport rank_candidates(std::vector<Candidate> candidates) {
  RankingReport report;
  report.regret_at_1 = regret_at_1(candidates);
  report.hit_at_3 = hit_at_k(candidates, 3);
  std::vector<double> scores;
  std::vector<double> accuracies;
  for (const auto& c : candidates) {
    scores.push_back(c.score);
    accuracies.push_back(c.accuracy);
  }
  try {
    report.pearson_r = pearson(scores, accuracies);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConstantInput) throw;
  }
  report.candidates = std::move(candidates);
  return report;
}

enum class SelectionMode { Best, Worst, Random };

struct Selection {
  std::string prompt_id;
  std::string trace_id;
  double score = 0.0;
};

// One pick per prompt (ascending prompt id). Best/worst ties go to the lowest
// trace id; random mode draws uniformly from a seeded stream.
inline std::vector<Selection> best_of_n(std::span<const ScoredResponse> pool, SelectionMode mode,
                                        std::uint64_t seed = 0) {
  std::map<std::string, std::vector<const ScoredResponse*>> by_prompt;
  for (const auto& s : pool) by_prompt[s.prompt_id].push_back(&s);

  Rng rng(seed);
  std::vector<Selection> picks;
  for (auto& [prompt, group] : by_prompt) {
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->trace_id < b->trace_id; });
    const ScoredResponse* chosen = group.front();
    if (mode == SelectionMode::Random) {
      chosen = group[rng.index(group.size())];
    } else {
      for (auto* s : group) {
        const bool better = mode == SelectionMode::Best ? s->record.score > chosen->record.score
                                                        : s->record.score < chosen->record.score;
        if (better) chosen = s;
      }
    }
    picks.push_back({prompt, chosen->trace_id, chosen->record.score});
  }
  return picks;
}

inline std::vector<Selection> best_of_n(std::span<const ResponseSummary> summaries, const NeuronWeights& weights,
                                        SelectionMode mode, std::uint64_t seed = 0) {
  std::vector<ScoredResponse> scored;
  scored.reserve(summaries.size());
  for (const auto& s : summaries) scored.push_back(score_summary(s, weights));
  return best_of_n(scored, mode, seed);
}

}  // namespace nex
