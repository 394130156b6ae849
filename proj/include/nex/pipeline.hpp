#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nex/cache.hpp"
#include "nex/credit.hpp"
#include "nex/parallel.hpp"
#include "nex/segmentation.hpp"
#include "nex/slope.hpp"

namespace nex {

struct PipelineOptions {
  SegmentationOptions segmentation;
  CreditOptions credit;
};

// Everything derived from one trace on the way to neuron credit.
struct TraceAnalysis {
  std::string trace_id;
  std::vector<Row> rows;
  SlopeSeries slopes;
  Segmentation segmentation;
  std::vector<CycleCredit> credits;
};

inline TraceAnalysis analyze_trace(const TraceCache& cache, const PipelineOptions& options = {}) {
  TraceAnalysis out;
  out.trace_id = cache.trace_id;
  out.rows = bucket_rows(cache);
  out.slopes = preprocess(novelty_slopes(out.rows));
  out.segmentation = segment(out.slopes.processed, options.segmentation);
  out.credits = credit_cycles(out.rows, out.slopes.raw, out.segmentation.cycles, options.credit);
  return out;
}

// Credit from one trace as a standalone accumulator.
inline NeuronWeights trace_weights(const TraceAnalysis& analysis, double epsilon) {
  NeuronWeights partial(epsilon);
  partial.accumulate(analysis.credits);
  return partial;
}

struct LearnResult {
  NeuronWeights weights;
  std::size_t traces = 0;
  std::size_t cycles = 0;
  std::size_t gated_cycles = 0;
  std::size_t effective_cycles = 0;
  std::size_t short_traces = 0;
};

// Per-trace analysis runs in parallel; partial accumulators merge in
// ascending trace-id order (input order for equal ids), so the result is
// independent of `jobs`.
inline LearnResult learn_weights(std::span<const TraceCache> caches, const PipelineOptions& options = {},
                                 std::size_t jobs = 1, std::string miniset_id = {}) {
  std::vector<NeuronWeights> partials(caches.size(), NeuronWeights(options.credit.epsilon));
  std::vector<TraceAnalysis> analyses(caches.size());
  parallel_for(caches.size(), jobs, [&](std::size_t i) {
    analyses[i] = analyze_trace(caches[i], options);
    partials[i] = trace_weights(analyses[i], options.credit.epsilon);
    analyses[i].rows.clear();
    analyses[i].rows.shrink_to_fit();
  });

  std::vector<std::size_t> order(caches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return caches[a].trace_id < caches[b].trace_id; });

  LearnResult result{NeuronWeights(options.credit.epsilon)};
  result.weights.miniset_id = std::move(miniset_id);
  for (std::size_t i : order) {
    result.weights.merge(partials[i]);
    result.weights.source_traces.push_back(caches[i].trace_id);
    ++result.traces;
    const auto& a = analyses[i];
    if (a.segmentation.short_trace) ++result.short_traces;
    result.cycles += a.credits.size();
    for (const auto& c : a.credits) {
      if (c.gate) ++result.gated_cycles;
      if (c.gate && c.effective()) ++result.effective_cycles;
    }
  }
  return result;
}

}  // namespace nex
