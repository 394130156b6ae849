#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nex/cache.hpp"
#include "nex/error.hpp"
#include "nex/pipeline.hpp"
#include "nex/random.hpp"
#include "nex/scoring.hpp"
#include "nex/segmentation.hpp"

namespace nex::synth {

// Latent role of a neuron in the synthetic universe. Productive neurons are
// introduced by cycles whose exploration pays off and re-fire in the
// following exploit phase; redundant ones never fire again; background
// neurons carry exploit-phase filler mass.
enum class NeuronKind : std::uint8_t { Productive, Redundant, Background };

inline constexpr const char* kind_name(NeuronKind k) {
  switch (k) {
    case NeuronKind::Productive: return "productive";
    case NeuronKind::Redundant: return "redundant";
    case NeuronKind::Background: return "background";
  }
  return "unknown";
}

// Neuron pools shared by every trace generated with the same seed, so that
// weights learned on one set of traces transfer to another.
class Universe {
 public:
  Universe(std::size_t pool_size, std::size_t background_size, std::uint64_t seed) {
    const std::size_t total = 2 * pool_size + background_size;
    if (total > 0x10000ull * 0x10000ull) throw Error(ErrorKind::InvalidArgument, "universe too large");
    std::vector<NeuronKey> keys;
    keys.reserve(total);
    // Spread keys over layers of 4096 units.
    for (std::size_t i = 0; i < total; ++i)
      keys.push_back(NeuronKey::from_parts(static_cast<std::uint16_t>(i / 4096), static_cast<std::uint16_t>(i % 4096)));
    Rng rng(seed);
    for (std::size_t i = total; i > 1; --i) std::swap(keys[i - 1], keys[rng.index(i)]);
    productive_.assign(keys.begin(), keys.begin() + pool_size);
    redundant_.assign(keys.begin() + pool_size, keys.begin() + 2 * pool_size);
    background_.assign(keys.begin() + 2 * pool_size, keys.end());
    for (auto k : productive_) kind_[k] = NeuronKind::Productive;
    for (auto k : redundant_) kind_[k] = NeuronKind::Redundant;
    for (auto k : background_) kind_[k] = NeuronKind::Background;
  }

  const std::vector<NeuronKey>& pool(NeuronKind kind) const {
    switch (kind) {
      case NeuronKind::Productive: return productive_;
      case NeuronKind::Redundant: return redundant_;
      default: return background_;
    }
  }

  NeuronKind kind(NeuronKey key) const { return kind_.at(key); }

 private:
  std::vector<NeuronKey> productive_;
  std::vector<NeuronKey> redundant_;
  std::vector<NeuronKey> background_;
  std::unordered_map<NeuronKey, NeuronKind, NeuronKeyHash> kind_;
};

struct SynthConfig {
  std::size_t rows = 80;
  std::size_t row_width = kDefaultRowWidth;
  double p_stay = 0.9;
  // Expected new neurons per explore / exploit row.
  double lambda_explore = 8.0;
  double lambda_exploit = 1.0;
  // Probability that a cycle's introduced neurons re-fire in its exploit
  // phase (the cycle is productive).
  double reuse = 0.5;
  // 0: Markov state sequence over `rows` rows. >0: exactly this many
  // explore->exploit cycles with phase lengths drawn from
  // [min_phase_rows, max_phase_rows]; `rows` is then ignored.
  std::size_t cycles = 0;
  std::size_t min_phase_rows = 2;
  std::size_t max_phase_rows = 6;
  double mass_mu = 0.0;
  double mass_sigma = 0.5;
  std::size_t background_per_token = 4;
  std::size_t pool_size = 4096;
  std::size_t background_size = 1024;
  std::uint64_t universe_seed = 7;
  std::uint64_t seed = 0;
  std::string trace_id = "synth-0";
  std::string prompt_id = "synth-prompt-0";
  std::string model_id = "synth-model";

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (row_width < 1) fail("row_width must be >= 1");
    if (cycles == 0 && rows < 1) fail("rows must be >= 1");
    if (!(p_stay >= 0.0 && p_stay <= 1.0)) fail("p_stay must lie in [0, 1]");
    if (!(reuse >= 0.0 && reuse <= 1.0)) fail("reuse must lie in [0, 1]");
    if (!(lambda_exploit >= 0.0)) fail("lambda_exploit must be >= 0");
    if (!(lambda_explore > lambda_exploit)) fail("lambda_explore must exceed lambda_exploit");
    if (lambda_explore < 1.0) fail("lambda_explore must be >= 1");
    if (min_phase_rows < 1 || max_phase_rows < min_phase_rows) fail("phase row bounds invalid");
    if (!(mass_sigma >= 0.0)) fail("mass_sigma must be >= 0");
    if (pool_size < 1 || background_size < 1) fail("pools must be nonempty");
  }
};

struct CycleTruth {
  std::size_t explore_begin = 0;
  std::size_t explore_end = 0;
  std::size_t exploit_end = 0;
  bool productive = false;
  std::size_t introduced = 0;

  // Effective by construction: every introduced neuron is reused.
  bool effective() const { return productive && introduced > 0; }
};

struct Truth {
  std::vector<Phase> states;
  std::vector<CycleTruth> cycles;
  std::vector<std::size_t> new_per_row;
  // Neurons introduced in explore rows, with their latent kind.
  std::vector<std::pair<NeuronKey, NeuronKind>> introduced;
};

struct SynthTrace {
  TraceCache cache;
  Truth truth;
};

namespace detail {

inline std::vector<Phase> draw_states(const SynthConfig& c, Rng& rng) {
  std::vector<Phase> states;
  if (c.cycles == 0) {
    // Sticky chain whose phases last at least min_phase_rows rows.
    Phase cur = Phase::Explore;
    std::size_t held = 0;
    for (std::size_t r = 0; r < c.rows; ++r) {
      if (r > 0 && held >= c.min_phase_rows && !rng.bernoulli(c.p_stay)) {
        cur = cur == Phase::Explore ? Phase::Exploit : Phase::Explore;
        held = 0;
      }
      states.push_back(cur);
      ++held;
    }
    return states;
  }
  const std::size_t span = c.max_phase_rows - c.min_phase_rows + 1;
  for (std::size_t i = 0; i < c.cycles; ++i) {
    for (Phase p : {Phase::Explore, Phase::Exploit}) {
      const std::size_t len = c.min_phase_rows + rng.index(span);
      states.insert(states.end(), len, p);
    }
  }
  return states;
}

// Uniform draw of a pool member not yet used in this trace, or nothing once
// the pool is exhausted.
inline std::optional<NeuronKey> draw_unused(const std::vector<NeuronKey>& pool,
                                            std::unordered_set<NeuronKey, NeuronKeyHash>& used, Rng& rng) {
  if (used.size() >= pool.size()) return std::nullopt;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const NeuronKey k = pool[rng.index(pool.size())];
    if (used.insert(k).second) return k;
  }
  for (NeuronKey k : pool)
    if (used.insert(k).second) return k;
  return std::nullopt;
}

}  // namespace detail

inline SynthTrace generate(const SynthConfig& config, const Universe& universe) {
  config.validate();
  Rng rng(config.seed);
  SynthTrace out;
  Truth& truth = out.truth;
  truth.states = detail::draw_states(config, rng);
  const std::size_t rows = truth.states.size();
  const std::size_t width = config.row_width;

  // Per token: neuron -> mass.
  std::vector<std::map<NeuronKey, double>> tokens(rows * width);
  auto fire = [&](std::size_t row, NeuronKey key) {
    const std::size_t t = row * width + rng.index(width);
    tokens[t][key] += rng.lognormal(config.mass_mu, config.mass_sigma);
  };

  std::unordered_set<NeuronKey, NeuronKeyHash> used_productive;
  std::unordered_set<NeuronKey, NeuronKeyHash> used_redundant;
  std::unordered_set<NeuronKey, NeuronKeyHash> used_background;
  std::vector<NeuronKey> seen_background;
  std::vector<std::size_t> background_row;
  truth.new_per_row.assign(rows, 0);

  const auto runs = runs_of(truth.states);
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    const Run& run = runs[ri];
    if (run.phase == Phase::Explore) {
      const bool has_exploit = ri + 1 < runs.size();
      const bool productive = has_exploit && rng.bernoulli(config.reuse);
      const NeuronKind kind = productive ? NeuronKind::Productive : NeuronKind::Redundant;
      auto& used = productive ? used_productive : used_redundant;
      std::vector<NeuronKey> introduced;
      for (std::size_t r = run.begin; r < run.end; ++r) {
        const std::size_t n = 1 + rng.poisson(config.lambda_explore - 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          auto key = detail::draw_unused(universe.pool(kind), used, rng);
          if (!key) break;
          fire(r, *key);
          introduced.push_back(*key);
          truth.introduced.push_back({*key, kind});
          ++truth.new_per_row[r];
        }
      }
      if (has_exploit) {
        const Run& next = runs[ri + 1];
        truth.cycles.push_back({run.begin, run.end, next.end, productive, introduced.size()});
        if (productive)
          for (std::size_t r = next.begin; r < next.end; ++r)
            for (NeuronKey k : introduced) fire(r, k);
      }
    } else {
      for (std::size_t r = run.begin; r < run.end; ++r) {
        const std::size_t n = rng.poisson(config.lambda_exploit);
        for (std::size_t i = 0; i < n; ++i) {
          auto key = detail::draw_unused(universe.pool(NeuronKind::Background), used_background, rng);
          if (!key) break;
          fire(r, *key);
          seen_background.push_back(*key);
          background_row.push_back(r);
          ++truth.new_per_row[r];
        }
      }
    }
  }

  // Background filler only draws from neurons introduced in earlier rows, so
  // it never changes the novelty count. seen_background is in row order.
  for (std::size_t r = 0; r < rows; ++r) {
    const auto visible = static_cast<std::size_t>(
        std::lower_bound(background_row.begin(), background_row.end(), r) - background_row.begin());
    if (visible == 0) continue;
    const std::size_t want = std::min(config.background_per_token, visible);
    for (std::size_t t = r * width; t < (r + 1) * width; ++t)
      for (std::size_t i = 0; i < want; ++i) {
        const NeuronKey k = seen_background[rng.index(visible)];
        tokens[t][k] += rng.lognormal(config.mass_mu, config.mass_sigma);
      }
  }

  TraceCache& cache = out.cache;
  cache.trace_id = config.trace_id;
  cache.prompt_id = config.prompt_id;
  cache.model_id = config.model_id;
  cache.row_width = width;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    TokenRecord rec;
    rec.position = t;
    rec.entropy = std::abs(rng.normal()) + (truth.states[t / width] == Phase::Explore ? 1.0 : 0.2);
    rec.logprob = -std::abs(rng.normal()) * 0.5;
    for (const auto& [k, m] : tokens[t]) rec.activations.push_back({k, m});
    std::stable_sort(rec.activations.begin(), rec.activations.end(),
                     [](const Activation& a, const Activation& b) { return a.mass > b.mass; });
    if (rec.activations.size() > cache.top_k) rec.activations.resize(cache.top_k);
    cache.tokens.push_back(std::move(rec));
  }
  return out;
}

inline SynthTrace generate(const SynthConfig& config) {
  return generate(config, Universe(config.pool_size, config.background_size, config.universe_seed));
}

// Fraction of rows whose decoded phase matches the generator's.
inline double state_accuracy(std::span<const Phase> decoded, std::span<const Phase> truth) {
  if (decoded.size() != truth.size() || truth.empty())
    throw Error(ErrorKind::InvalidArgument, "state sequences differ in length");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (decoded[i] == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct SweepLevel {
  double reuse = 0.5;
  std::size_t cycles = 6;
};

struct SweepOptions {
  std::size_t trials = 30;
  SynthConfig base = [] {
    SynthConfig c;
    c.pool_size = 1024;
    return c;
  }();
  PipelineOptions pipeline;
  // Weights are learned once on traces from the same universe at a balanced
  // reuse rate, then used to score every level.
  std::size_t calibration_traces = 40;
  double calibration_reuse = 0.5;
  std::size_t calibration_cycles = 6;
  // Task proxy: 1 - exp(-productive / saturation) - cost * redundant.
  double proxy_saturation = 2.0;
  double proxy_redundancy_cost = 0.08;
  std::size_t jobs = 1;
};

struct SweepRow {
  SweepLevel level;
  double mean_explore_segments = 0.0;  // decoded explore runs per trace
  double mean_score = 0.0;             // good-mass fraction
  double mean_proxy = 0.0;
};

inline double task_proxy(const Truth& truth, double saturation, double redundancy_cost) {
  double productive = 0.0;
  double redundant = 0.0;
  for (const auto& c : truth.cycles) (c.effective() ? productive : redundant) += 1.0;
  return 1.0 - std::exp(-productive / saturation) - redundancy_cost * redundant;
}

inline std::vector<SweepRow> sweep_exploration(std::span<const SweepLevel> levels, const SweepOptions& options) {
  if (levels.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one level");
  if (options.trials == 0) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one trial per level");
  if (options.calibration_traces == 0) throw Error(ErrorKind::InvalidArgument, "calibration set is empty");
  const Universe universe(options.base.pool_size, options.base.background_size, options.base.universe_seed);

  std::vector<TraceCache> calibration(options.calibration_traces);
  parallel_for(calibration.size(), options.jobs, [&](std::size_t i) {
    SynthConfig c = options.base;
    c.reuse = options.calibration_reuse;
    c.cycles = options.calibration_cycles;
    c.seed = derive_seed(options.base.seed, 1'000'000 + i);
    c.trace_id = "calib-" + std::to_string(i);
    c.prompt_id = c.trace_id;
    calibration[i] = generate(c, universe).cache;
  });
  const NeuronWeights weights = learn_weights(calibration, options.pipeline, options.jobs, "calibration").weights;

  std::vector<SweepRow> table;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    std::vector<double> segments(options.trials), scores(options.trials), proxies(options.trials);
    parallel_for(options.trials, options.jobs, [&](std::size_t t) {
      SynthConfig c = options.base;
      c.reuse = levels[li].reuse;
      c.cycles = levels[li].cycles;
      c.seed = derive_seed(options.base.seed, li * 100'000 + t);
      c.trace_id = "level" + std::to_string(li) + "-" + std::to_string(t);
      c.prompt_id = "trial-" + std::to_string(t);
      const SynthTrace trace = generate(c, universe);
      const TraceAnalysis a = analyze_trace(trace.cache, options.pipeline);
      std::size_t explore_runs = 0;
      for (const auto& run : a.segmentation.runs)
        if (run.phase == Phase::Explore) ++explore_runs;
      segments[t] = static_cast<double>(explore_runs);
      scores[t] = score_response(summarize(trace.cache), weights).score;
      proxies[t] = task_proxy(trace.truth, options.proxy_saturation, options.proxy_redundancy_cost);
    });
    table.push_back({levels[li], stats::mean(segments), stats::mean(scores), stats::mean(proxies)});
  }
  return table;
}

}  // namespace nex::synth
