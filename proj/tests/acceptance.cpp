// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "nex/nex.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nex;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome viterbi_oracle() {
  const auto start = Clock::now();
  Rng rng(1001);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal() * 2.0;
    const EmissionParams em{0.5 + rng.uniform(), 0.2 + rng.uniform(), -0.5 - rng.uniform(), 0.2 + rng.uniform()};
    const double rho = 0.5 + 0.49 * rng.uniform();
    const auto want =
        oracle::brute_force_viterbi(z, em.mean_explore, em.var_explore, em.mean_exploit, em.var_exploit, rho);
    const auto got = viterbi(z, em, rho);
    for (std::size_t t = 0; t < n; ++t)
      if ((got[t] == Phase::Explore) != (want[t] == 1)) {
        ++mismatches;
        break;
      }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0, fmt("200 instances, %d mismatches, %.2fs", mismatches, secs)};
}

Outcome preprocessing_oracle() {
  Rng rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s(2 + rng.index(100));
    for (auto& v : s) v = rng.uniform() * 0.5;
    const auto got = preprocess(s).processed;
    const auto want = oracle::preprocess(s).z;
    for (std::size_t r = 0; r < s.size(); ++r) worst = std::max(worst, std::abs(got[r] - want[r]));
  }
  double worst_residual = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = rng.normal(), b = rng.normal();
    std::vector<double> y(2 + rng.index(100));
    for (std::size_t r = 0; r < y.size(); ++r) y[r] = a + b * std::log1p(static_cast<double>(r));
    for (double e : detrend(y).residuals) worst_residual = std::max(worst_residual, std::abs(e));
  }
  return {worst <= 1e-9 && worst_residual <= 1e-9,
          fmt("max |z - oracle| = %.3g, max model-matched residual = %.3g", worst, worst_residual)};
}

Outcome credit_fixture() {
  const TraceCache cache = testing_support::three_row_fixture();
  const auto rows = bucket_rows(cache);
  const auto slopes = novelty_slopes(rows);
  const std::vector<Phase> states{Phase::Explore, Phase::Explore, Phase::Exploit};
  const auto credits = credit_cycles(rows, slopes, extract_cycles(states));
  if (credits.size() != 1) return {false, "expected one cycle"};
  const CycleCredit& c = credits[0];
  // Hand-computed: explore rows 0-1 introduce {1:3, 2:1, 3:0.5, 4:2}; exploit
  // row 2 carries 3.5 of which 2.5 on introduced neurons; slopes 1.5, 0.5, 0.5.
  const double reuse = 2.5 / (3.5 + 1e-6);
  const double cons = 1.0 - 0.5 / (1.0 + 1e-6);
  const double err = std::max({std::abs(c.reuse_share - reuse), std::abs(c.progress - 0.0),
                               std::abs(c.consolidation - cons), std::abs(c.strength - 0.5)});
  NeuronWeights w;
  w.accumulate(credits);
  double werr = 0.0;
  for (std::uint32_t k = 1; k <= 5; ++k) werr = std::max(werr, std::abs(w.weight(NeuronKey(k))));
  const bool alpha_ok = c.introduced.size() == 4 && c.introduced[0].mass == 3.0 && c.introduced[1].mass == 1.0 &&
                        c.introduced[2].mass == 0.5 && c.introduced[3].mass == 2.0;
  return {err <= 1e-12 && werr <= 1e-12 && alpha_ok && c.gate,
          fmt("max credit error %.3g, max |w - 0| %.3g, gate %d", err, werr, int(c.gate))};
}

Outcome score_identities() {
  Rng rng(1004);
  int bounds = 0, scale = 0, identity = 0, repair = 0;
  double scale_any = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ResponseSummary s;
    NeuronWeights weights;
    std::vector<double> w;
    const std::size_t n = 1 + rng.index(40);
    for (std::size_t k = 0; k < n; ++k) {
      s.mass.push_back({NeuronKey(static_cast<std::uint32_t>(k)), rng.bernoulli(0.1) ? 0.0 : std::exp(rng.normal())});
      const Accumulator acc{std::exp(rng.normal() * 3), std::exp(rng.normal() * 3)};
      weights.set(NeuronKey(static_cast<std::uint32_t>(k)), acc);
      w.push_back(weights.weight(NeuronKey(static_cast<std::uint32_t>(k))));
    }
    const ScoreRecord r = score_response(s, weights);
    if (!(r.score >= 0.0 && r.score <= 1.0)) ++bounds;
    if (r.abs_mass > 0.0 && std::abs(r.score - r.reward / (r.reward + r.bad)) > 1e-9) ++identity;

    ResponseSummary scaled = s, any = s;
    const double c2 = std::ldexp(1.0, static_cast<int>(rng.index(40)) - 20);
    const double c = std::exp(rng.normal() * 5.0);
    for (auto& a : scaled.mass) a.mass *= c2;
    for (auto& a : any.mass) a.mass *= c;
    if (score_response(scaled, weights).score != r.score) ++scale;
    scale_any = std::max(scale_any, std::abs(score_response(any, weights).score - r.score));

    const std::size_t k = rng.index(n);
    ResponseSummary bumped = s;
    bumped.mass[k].mass += std::exp(rng.normal());
    const double after = score_response(bumped, weights).score;
    if ((w[k] > 0.0 && after < r.score) || (w[k] < 0.0 && after > r.score)) ++repair;
  }
  return {bounds == 0 && scale == 0 && identity == 0 && repair == 0 && scale_any <= 1e-12,
          fmt("bound violations %d, power-of-two scale mismatches %d, max drift under arbitrary scale %.3g, "
              "identity violations %d, repair violations %d",
              bounds, scale, scale_any, identity, repair)};
}

Outcome weight_properties() {
  Rng rng(1005);
  int antisym = 0, bound = 0, zero = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = rng.bernoulli(0.05) ? 0.0 : std::exp(rng.normal() * 10.0);
    const double b = rng.bernoulli(0.05) ? 0.0 : std::exp(rng.normal() * 10.0);
    const double w = signed_weight(a, b);
    if (signed_weight(b, a) != -w) ++antisym;
    if (!(std::abs(w) < 1.0)) ++bound;
    if (signed_weight(a, a) != 0.0) ++zero;
  }
  for (double extreme : {0.0, 1e-300, 1e300, 1.7976931348623157e308})
    if (!(std::abs(signed_weight(extreme, 0.0)) < 1.0)) ++bound;
  return {antisym == 0 && bound == 0 && zero == 0,
          fmt("100000 pairs: antisymmetry violations %d, |w| >= 1 cases %d, nonzero at m+ = m- %d", antisym, bound,
              zero)};
}

Outcome synthetic_segmentation() {
  const auto start = Clock::now();
  const synth::Universe universe(4096, 1024, 7);
  std::vector<TraceCache> caches;
  double accuracy = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    synth::SynthConfig c;
    c.rows = 80;
    c.p_stay = 0.9;
    c.lambda_explore = 8.0;
    c.lambda_exploit = 1.0;
    c.seed = derive_seed(2024, s);
    c.trace_id = fmt("seg-%02d", s);
    const synth::SynthTrace t = synth::generate(c, universe);
    accuracy += synth::state_accuracy(analyze_trace(t.cache).segmentation.states, t.truth.states);
    caches.push_back(t.cache);
  }
  accuracy /= seeds;
  const NeuronWeights weights = learn_weights(caches, {}, 1).weights;
  std::size_t prod = 0, prod_ok = 0, red = 0, red_ok = 0;
  for (const auto& [key, acc] : weights.entries()) {
    const double w = weights.weight(key);
    if (universe.kind(key) == synth::NeuronKind::Productive) {
      ++prod;
      prod_ok += w > 0.0;
    } else if (universe.kind(key) == synth::NeuronKind::Redundant) {
      ++red;
      red_ok += w < 0.0;
    }
  }
  const double p = prod ? double(prod_ok) / double(prod) : 0.0;
  const double r = red ? double(red_ok) / double(red) : 0.0;
  const double secs = seconds_since(start);
  return {accuracy >= 0.9 && p >= 0.8 && r >= 0.8 && secs < 60.0,
          fmt("state accuracy %.4f, productive w>0 %zu/%zu (%.3f), redundant w<0 %zu/%zu (%.3f), %.2fs", accuracy,
              prod_ok, prod, p, red_ok, red, r, secs)};
}

Outcome monotonicity_sweeps() {
  synth::SweepOptions opts;
  opts.trials = 30;
  const std::vector<synth::SweepLevel> reuse{{0.9, 6}, {0.5, 6}, {0.1, 6}};
  const auto a = synth::sweep_exploration(reuse, opts);
  const bool decreasing = a[0].mean_score > a[1].mean_score && a[1].mean_score > a[2].mean_score;

  const std::vector<synth::SweepLevel> segments{{0.5, 1}, {0.5, 2}, {0.5, 4}, {0.5, 8}, {0.5, 16}};
  const auto b = synth::sweep_exploration(segments, opts);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < b.size(); ++i)
    if (b[i].mean_proxy > b[peak].mean_proxy) peak = i;
  const bool rise_fall = peak > 0 && peak + 1 < b.size();

  std::string proxies;
  for (const auto& row : b) proxies += fmt(" %.3f", row.mean_proxy);
  return {decreasing && rise_fall,
          fmt("scores at reuse 0.9/0.5/0.1: %.4f %.4f %.4f; proxy at 1/2/4/8/16 segments:%s (peak at %zu)",
              a[0].mean_score, a[1].mean_score, a[2].mean_score, proxies.c_str(), segments[peak].cycles)};
}

Outcome end_to_end_determinism() {
  const fs::path dir = fs::temp_directory_path() / "nex_acceptance_e2e";
  fs::remove_all(dir);
  std::ostringstream log;
  cli::SynthRequest req;
  req.count = 12;
  req.rows = 60;
  req.seed = 99;
  RunConfig cfg;
  cfg.jobs = 1;
  cli::cmd_synth(req, dir / "data", cfg, log);
  // Same paths each run; the provenance header names its inputs.
  std::string outputs[3];
  for (int run = 0; run < 3; ++run) {
    cfg.jobs = run == 2 ? 4 : 1;
    const fs::path w = dir / "out.nexweights.jsonl";
    const fs::path s = dir / "out.scores.jsonl";
    cli::cmd_learn_weights({dir / "data"}, w, cfg, "synth", log);
    cli::cmd_score(w, {dir / "data"}, s, cfg, std::nullopt, log);
    for (const auto& p : {w, s}) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      outputs[run] += buf.str();
    }
  }
  fs::remove_all(dir);
  const bool same = outputs[0] == outputs[1] && !outputs[0].empty();
  const bool threads = outputs[0] == outputs[2];
  return {same && threads, fmt("two runs %zu bytes, identical: %s; 4-thread rerun identical: %s", outputs[0].size(),
                               same ? "yes" : "no", threads ? "yes" : "no")};
}

Outcome pearson_and_ranking() {
  Rng rng(1009);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(10 + rng.index(200)), y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = rng.normal() * 3.0 + 1.0;
      y[j] = rng.normal() + 0.3 * x[j];
    }
    worst = std::max(worst, std::abs(pearson(x, y) - oracle::pearson(x, y)));
  }
  const std::vector<Candidate> aligned{{"a", 0.9, 40}, {"b", 0.5, 30}, {"c", 0.1, 10}};
  const std::vector<Candidate> inverted{{"a", 0.4, 10}, {"b", 0.3, 20}, {"c", 0.2, 30}, {"d", 0.1, 40}};
  const std::vector<Candidate> three{{"a", 0.1, 50}, {"b", 0.5, 10}, {"c", 0.9, 20}};
  const bool examples = regret_at_1(aligned) == 0.0 && hit_at_k(aligned, 3) == 1 && regret_at_1(inverted) == 30.0 &&
                        hit_at_k(inverted, 3) == 0 && hit_at_k(three, 3) == 1;
  return {worst <= 1e-9 && examples, fmt("max |r - oracle| = %.3g, regret/hit examples %s", worst,
                                         examples ? "ok" : "wrong")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"viterbi-exhaustive-oracle", viterbi_oracle},
      {"preprocessing-oracle", preprocessing_oracle},
      {"credit-hand-fixture", credit_fixture},
      {"score-identities", score_identities},
      {"weight-properties", weight_properties},
      {"synthetic-segmentation", synthetic_segmentation},
      {"monotonicity-sweeps", monotonicity_sweeps},
      {"end-to-end-determinism", end_to_end_determinism},
      {"pearson-and-ranking", pearson_and_ranking},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
