#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nex/cache.hpp"
#include "nex/segmentation.hpp"
#include "nex/stats.hpp"

namespace nex {

inline constexpr double kCreditEpsilon = 1e-6;

struct CreditOptions {
  double epsilon = kCreditEpsilon;
  // Ablation: credit every neuron active in the explore rows, not only the
  // ones first introduced there.
  bool all_active = false;
};

using FirstSeenIndex = std::unordered_map<NeuronKey, std::size_t, NeuronKeyHash>;

// Row in which each neuron first appears in the trace.
inline FirstSeenIndex first_seen_rows(std::span<const Row> rows) {
  FirstSeenIndex first;
  for (const auto& row : rows)
    for (const auto& a : row.masses) first.try_emplace(a.key, row.index);
  return first;
}

inline void check_cycle_bounds(const Cycle& c, std::size_t rows) {
  if (c.explore_begin >= c.explore_end || c.exploit_begin >= c.exploit_end || c.explore_end != c.exploit_begin ||
      c.exploit_end > rows)
    throw Error(ErrorKind::InvalidArgument, "cycle " + std::to_string(c.index) + " is outside the trace");
}

// Neurons whose first appearance in the trace lies in the cycle's explore
// rows, each with its introduction mass (A_{k,r} at the first-seen row).
// Ascending by key.
inline std::vector<Activation> new_neurons(const Cycle& cycle, std::span<const Row> rows,
                                           const FirstSeenIndex& first_seen) {
  check_cycle_bounds(cycle, rows.size());
  std::vector<Activation> introduced;
  for (std::size_t r = cycle.explore_begin; r < cycle.explore_end; ++r)
    for (const auto& a : rows[r].masses)
      if (first_seen.at(a.key) == r) introduced.push_back(a);
  std::sort(introduced.begin(), introduced.end(), [](const auto& x, const auto& y) { return x.key < y.key; });
  return introduced;
}

inline std::vector<Activation> new_neurons(const Cycle& cycle, std::span<const Row> rows) {
  return new_neurons(cycle, rows, first_seen_rows(rows));
}

// All neurons active in the explore rows with their summed mass.
inline std::vector<Activation> active_neurons(const Cycle& cycle, std::span<const Row> rows) {
  check_cycle_bounds(cycle, rows.size());
  std::map<NeuronKey, double> mass;
  for (std::size_t r = cycle.explore_begin; r < cycle.explore_end; ++r)
    for (const auto& a : rows[r].masses) mass[a.key] += a.mass;
  std::vector<Activation> out;
  out.reserve(mass.size());
  for (const auto& [k, m] : mass) out.push_back({k, m});
  return out;
}

// Share of exploit-phase mass carried by the introduced neurons.
inline double reuse_share(const Cycle& cycle, std::span<const Activation> introduced, std::span<const Row> rows,
                          double epsilon = kCreditEpsilon) {
  check_cycle_bounds(cycle, rows.size());
  double reused = 0.0;
  double total = 0.0;
  for (std::size_t r = cycle.exploit_begin; r < cycle.exploit_end; ++r) {
    for (const auto& a : rows[r].masses) {
      total += a.mass;
      const bool is_new = std::binary_search(introduced.begin(), introduced.end(), a,
                                             [](const Activation& x, const Activation& y) { return x.key < y.key; });
      if (is_new) reused += a.mass;
    }
  }
  return reused / (total + epsilon);
}

// Reuse shares centered on their median within the trace.
inline std::vector<double> progress(std::span<const double> shares) {
  if (shares.empty()) return {};
  const double mid = stats::median(shares);
  std::vector<double> out(shares.size());
  for (std::size_t i = 0; i < shares.size(); ++i) out[i] = shares[i] - mid;
  return out;
}

namespace detail {
inline double phase_median(std::span<const double> slopes, std::size_t begin, std::size_t end) {
  if (begin >= end || end > slopes.size()) throw Error(ErrorKind::InvalidArgument, "row range outside the slopes");
  return stats::median(slopes.subspan(begin, end - begin));
}
}  // namespace detail

// Clipped relative drop in raw slope from explore to exploit rows.
inline double consolidation(const Cycle& cycle, std::span<const double> raw_slopes, double epsilon = kCreditEpsilon) {
  const double explore = detail::phase_median(raw_slopes, cycle.explore_begin, cycle.explore_end);
  const double exploit = detail::phase_median(raw_slopes, cycle.exploit_begin, cycle.exploit_end);
  return std::clamp(1.0 - exploit / (explore + epsilon), 0.0, 1.0);
}

struct StrengthGate {
  double strength = 0.0;
  bool open = false;
};

// Explore-phase slope median relative to the whole-trace median; the gate is
// binary.
inline StrengthGate strength_gate(const Cycle& cycle, std::span<const double> raw_slopes) {
  if (raw_slopes.empty()) throw Error(ErrorKind::EmptyTrace, "no rows");
  StrengthGate g;
  g.strength = detail::phase_median(raw_slopes, cycle.explore_begin, cycle.explore_end) - stats::median(raw_slopes);
  g.open = g.strength > 0.0;
  return g;
}

struct CycleCredit {
  std::size_t index = 0;
  std::vector<Activation> introduced;  // N_i with intro mass, ascending key
  double reuse_share = 0.0;
  double progress = 0.0;
  double consolidation = 0.0;
  double strength = 0.0;
  bool gate = false;

  bool effective() const { return progress > 0.0 && consolidation > 0.0; }
};

// Credit for every cycle of one trace. Progress is centered over all cycles,
// gated or not.
inline std::vector<CycleCredit> credit_cycles(std::span<const Row> rows, std::span<const double> raw_slopes,
                                              std::span<const Cycle> cycles, const CreditOptions& options = {}) {
  if (raw_slopes.size() != rows.size()) throw Error(ErrorKind::InvalidArgument, "one slope per row required");
  const FirstSeenIndex first = first_seen_rows(rows);
  std::vector<CycleCredit> credits(cycles.size());
  std::vector<double> shares(cycles.size());
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    auto& c = credits[i];
    c.index = cycles[i].index;
    c.introduced = options.all_active ? active_neurons(cycles[i], rows) : new_neurons(cycles[i], rows, first);
    c.reuse_share = reuse_share(cycles[i], c.introduced, rows, options.epsilon);
    c.consolidation = consolidation(cycles[i], raw_slopes, options.epsilon);
    const auto g = strength_gate(cycles[i], raw_slopes);
    c.strength = g.strength;
    c.gate = g.open;
    shares[i] = c.reuse_share;
  }
  const auto centered = progress(shares);
  for (std::size_t i = 0; i < cycles.size(); ++i) credits[i].progress = centered[i];
  return credits;
}

// tanh(log((m_pos + eps) / (m_neg + eps))). The ratio is taken as
// larger / smaller and the sign applied afterwards, so swapping the
// accumulators negates w exactly; the magnitude stays below 1.
inline double signed_weight(double m_pos, double m_neg, double epsilon = kCreditEpsilon) {
  const double a = m_pos + epsilon;
  const double b = m_neg + epsilon;
  const double ratio = a >= b ? a / b : b / a;
  const double magnitude = std::min(std::tanh(std::log(ratio)), std::nextafter(1.0, 0.0));
  return a >= b ? magnitude : -magnitude;
}

struct Accumulator {
  double m_pos = 0.0;
  double m_neg = 0.0;

  friend bool operator==(const Accumulator&, const Accumulator&) = default;
};

// Per-neuron effective/redundant exploration mass and the derived signed
// weight.
class NeuronWeights {
 public:
  explicit NeuronWeights(double epsilon = kCreditEpsilon) : epsilon_(epsilon) {}

  double epsilon() const { return epsilon_; }

  // Gated-out cycles change nothing; zero deltas are not recorded.
  void accumulate(const CycleCredit& credit) {
    if (!credit.gate) return;
    const bool effective = credit.effective();
    for (const auto& a : credit.introduced) {
      const double delta = effective ? a.mass * credit.progress * credit.consolidation
                                     : a.mass * std::abs(credit.progress);
      if (delta == 0.0) continue;
      auto& acc = entries_[a.key];
      (effective ? acc.m_pos : acc.m_neg) += delta;
    }
  }

  void accumulate(std::span<const CycleCredit> credits) {
    for (const auto& c : credits) accumulate(c);
  }

  void merge(const NeuronWeights& other) {
    for (const auto& [key, acc] : other.entries_) {
      auto& mine = entries_[key];
      mine.m_pos += acc.m_pos;
      mine.m_neg += acc.m_neg;
    }
  }

  void set(NeuronKey key, Accumulator acc) { entries_[key] = acc; }

  // 0 for neurons without evidence.
  double weight(NeuronKey key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0.0 : signed_weight(it->second.m_pos, it->second.m_neg, epsilon_);
  }

  const Accumulator* find(NeuronKey key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<NeuronKey, Accumulator>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::string miniset_id;
  std::vector<std::string> source_traces;

 private:
  double epsilon_;
  std::map<NeuronKey, Accumulator> entries_;
};

}  // namespace nex
