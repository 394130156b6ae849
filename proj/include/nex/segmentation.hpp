#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nex/error.hpp"
#include "nex/gmm.hpp"

namespace nex {

enum class Phase : std::uint8_t { Exploit = 0, Explore = 1 };

inline constexpr char phase_letter(Phase p) { return p == Phase::Explore ? 'E' : 'X'; }

inline constexpr double kDefaultStickiness = 0.95;
inline constexpr std::size_t kDefaultMinRun = 2;
// Traces shorter than this many rows are not segmented into cycles.
inline constexpr std::size_t kMinSegmentableRows = 4;

// Maximum a-posteriori state path of a two-state Gaussian HMM with stay
// probability `rho` and a uniform initial distribution. Ties resolve toward
// Exploit.
inline std::vector<Phase> viterbi(std::span<const double> z, const EmissionParams& em,
                                  double rho = kDefaultStickiness) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorKind::InvalidArgument, "rho must lie in (0, 1)");
  const std::size_t n = z.size();
  if (n == 0) return {};

  const double log_stay = std::log(rho);
  const double log_switch = std::log1p(-rho);
  const double log_init = std::log(0.5);
  auto emit = [&](std::size_t t, int s) {
    return s == 1 ? gaussian_log_pdf(z[t], em.mean_explore, em.var_explore)
                  : gaussian_log_pdf(z[t], em.mean_exploit, em.var_exploit);
  };

  // Index 0 = Exploit, 1 = Explore.
  std::vector<std::array<std::uint8_t, 2>> back(n);
  std::array<double, 2> score{log_init + emit(0, 0), log_init + emit(0, 1)};
  for (std::size_t t = 1; t < n; ++t) {
    std::array<double, 2> next{};
    for (int s = 0; s < 2; ++s) {
      const double from_exploit = score[0] + (s == 0 ? log_stay : log_switch);
      const double from_explore = score[1] + (s == 1 ? log_stay : log_switch);
      const bool take_explore = from_explore > from_exploit;
      back[t][s] = take_explore ? 1 : 0;
      next[s] = (take_explore ? from_explore : from_exploit) + emit(t, s);
    }
    score = next;
  }

  std::vector<Phase> path(n);
  int state = score[1] > score[0] ? 1 : 0;
  for (std::size_t t = n; t-- > 0;) {
    path[t] = state == 1 ? Phase::Explore : Phase::Exploit;
    if (t > 0) state = back[t][state];
  }
  return path;
}

// Half-open row range [begin, end) sharing one phase.
struct Run {
  Phase phase = Phase::Exploit;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const Run&, const Run&) = default;
};

inline std::vector<Run> runs_of(std::span<const Phase> states) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (runs.empty() || runs.back().phase != states[i])
      runs.push_back({states[i], i, i + 1});
    else
      runs.back().end = i + 1;
  }
  return runs;
}

// Repeatedly relabels a run shorter than `min_run` to its longer neighbour
// (equal neighbours: the following run). The shortest run goes first; among
// equally short runs, the one with the longest absorbing neighbour, then the
// leftmost.
inline std::vector<Phase> smooth_min_run(std::vector<Phase> states, std::size_t min_run = kDefaultMinRun) {
  while (true) {
    const auto runs = runs_of(states);
    if (runs.size() <= 1) break;

    std::optional<std::size_t> chosen;
    std::size_t chosen_target = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].length() >= min_run) continue;
      const std::size_t prev_len = i > 0 ? runs[i - 1].length() : 0;
      const std::size_t next_len = i + 1 < runs.size() ? runs[i + 1].length() : 0;
      const std::size_t target_len = std::max(prev_len, next_len);
      if (!chosen || runs[i].length() < runs[*chosen].length() ||
          (runs[i].length() == runs[*chosen].length() && target_len > chosen_target)) {
        chosen = i;
        chosen_target = target_len;
      }
    }
    if (!chosen) break;

    const std::size_t i = *chosen;
    const std::size_t prev_len = i > 0 ? runs[i - 1].length() : 0;
    const std::size_t next_len = i + 1 < runs.size() ? runs[i + 1].length() : 0;
    const Phase into = next_len >= prev_len ? runs[i + 1].phase : runs[i - 1].phase;
    for (std::size_t r = runs[i].begin; r < runs[i].end; ++r) states[r] = into;
  }
  return states;
}

// An explore run and the exploit run that immediately follows it.
struct Cycle {
  std::size_t index = 0;
  std::size_t explore_begin = 0;
  std::size_t explore_end = 0;  // == exploit_begin
  std::size_t exploit_begin = 0;
  std::size_t exploit_end = 0;

  friend bool operator==(const Cycle&, const Cycle&) = default;
};

inline std::vector<Cycle> extract_cycles(std::span<const Phase> states) {
  const auto runs = runs_of(states);
  std::vector<Cycle> cycles;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    if (runs[i].phase != Phase::Explore || runs[i + 1].phase != Phase::Exploit) continue;
    cycles.push_back({cycles.size(), runs[i].begin, runs[i].end, runs[i + 1].begin, runs[i + 1].end});
  }
  return cycles;
}

struct SegmentationOptions {
  double rho = kDefaultStickiness;
  std::size_t min_run = kDefaultMinRun;
  GmmOptions gmm;
  std::size_t min_rows = kMinSegmentableRows;
};

struct Segmentation {
  std::vector<Phase> states;
  std::vector<Run> runs;
  std::vector<Cycle> cycles;
  std::optional<EmissionParams> emissions;
  bool short_trace = false;  // fewer than min_rows rows
  bool degenerate = false;   // flat observations
};

// GMM-initialized sticky HMM, min-run smoothing, cycle extraction. Short or
// flat traces decode as a single exploit run with no cycles.
inline Segmentation segment(std::span<const double> z, const SegmentationOptions& options = {}) {
  Segmentation seg;
  if (z.size() < options.min_rows) {
    seg.short_trace = true;
    seg.states.assign(z.size(), Phase::Exploit);
  } else {
    try {
      seg.emissions = init_emissions(z, options.gmm);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateSeries) throw;
      seg.degenerate = true;
    }
    if (seg.emissions) {
      seg.states = smooth_min_run(viterbi(z, *seg.emissions, options.rho), options.min_run);
      seg.cycles = extract_cycles(seg.states);
    } else {
      seg.states.assign(z.size(), Phase::Exploit);
    }
  }
  seg.runs = runs_of(seg.states);
  return seg;
}

}  // namespace nex
