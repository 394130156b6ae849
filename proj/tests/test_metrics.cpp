#include <catch_amalgamated.hpp>

#include "nex/baselines.hpp"
#include "nex/metrics.hpp"
#include "nex/random.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nex;

namespace {

ScoredResponse scored(const std::string& prompt, const std::string& trace, double score) {
  ScoredResponse s;
  s.prompt_id = prompt;
  s.trace_id = trace;
  s.record.score = score;
  return s;
}

TraceCache with_entropies(const std::vector<double>& entropy, std::size_t width) {
  TraceCache c = testing_support::make_cache(std::vector<testing_support::TokenActs>(entropy.size()), width);
  for (std::size_t t = 0; t < entropy.size(); ++t) c.tokens[t].entropy = entropy[t];
  return c;
}

}  // namespace

TEST_CASE("pearson examples", "[metrics]") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, neg;
  for (double v : x) {
    y.push_back(2 * v + 1);
    neg.push_back(-v);
  }
  CHECK(std::abs(pearson(x, y) - 1.0) <= 1e-12);
  CHECK(std::abs(pearson(x, neg) + 1.0) <= 1e-12);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{2}), Error);
}

TEST_CASE("pearson matches the covariance-formula oracle", "[metrics][oracle]") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(100), y(100);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    CHECK(std::abs(pearson(x, y) - oracle::pearson(x, y)) <= 1e-9);
  }
}

TEST_CASE("property: pearson is invariant to positive affine maps", "[metrics][property]") {
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(3 + rng.index(50)), y(x.size()), ax(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    const double a = 0.1 + rng.uniform() * 10.0;
    const double b = rng.normal() * 5.0;
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + b;
    CHECK(std::abs(pearson(ax, y) - pearson(x, y)) <= 1e-12);
  }
}

TEST_CASE("regret and hit examples", "[metrics]") {
  const std::vector<Candidate> aligned{{"a", 0.9, 40}, {"b", 0.5, 30}, {"c", 0.1, 10}};
  CHECK(regret_at_1(aligned) == 0.0);
  CHECK(hit_at_k(aligned, 3) == 1);

  const std::vector<Candidate> inverted{{"a", 0.4, 10}, {"b", 0.3, 20}, {"c", 0.2, 30}, {"d", 0.1, 40}};
  CHECK(regret_at_1(inverted) == 30.0);
  CHECK(hit_at_k(inverted, 3) == 0);

  const std::vector<Candidate> three{{"a", 0.1, 50}, {"b", 0.5, 10}, {"c", 0.9, 20}};
  CHECK(hit_at_k(three, 3) == 1);

  // Score tie: lower id ranks first.
  const std::vector<Candidate> tie{{"b", 0.5, 10}, {"a", 0.5, 30}};
  CHECK(regret_at_1(tie) == 0.0);

  CHECK_THROWS_AS(regret_at_1(std::vector<Candidate>{}), Error);
}

TEST_CASE("ranking report tolerates constant scores", "[metrics]") {
  const RankingReport r = rank_candidates({{"a", 0.5, 10}, {"b", 0.5, 20}});
  CHECK_FALSE(r.pearson_r.has_value());
  CHECK(r.regret_at_1 == 10.0);
}

TEST_CASE("property: regret is nonnegative and zero when the top agrees", "[metrics][property]") {
  Rng rng(63);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Candidate> c(1 + rng.index(8));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = {"c" + std::to_string(i), rng.uniform(), rng.uniform() * 100};
    CHECK(regret_at_1(c) >= 0.0);
    for (auto& x : c) x.score = x.accuracy;
    CHECK(regret_at_1(c) == 0.0);
    CHECK(hit_at_k(c, 1) == 1);
  }
}

TEST_CASE("best-of-n selection", "[metrics]") {
  const std::vector<ScoredResponse> pool{scored("p", "t0", 0.2), scored("p", "t1", 0.9), scored("p", "t2", 0.5)};
  CHECK(best_of_n(pool, SelectionMode::Best)[0].trace_id == "t1");
  CHECK(best_of_n(pool, SelectionMode::Worst)[0].trace_id == "t0");

  const std::vector<ScoredResponse> ties{scored("p", "t9", 0.5), scored("p", "t3", 0.5)};
  CHECK(best_of_n(ties, SelectionMode::Best)[0].trace_id == "t3");
  CHECK(best_of_n(ties, SelectionMode::Worst)[0].trace_id == "t3");

  const auto r1 = best_of_n(pool, SelectionMode::Random, 7);
  const auto r2 = best_of_n(pool, SelectionMode::Random, 7);
  CHECK(r1[0].trace_id == r2[0].trace_id);
}

TEST_CASE("property: best >= random >= worst", "[metrics][property]") {
  Rng rng(64);
  std::vector<ScoredResponse> pool;
  for (int p = 0; p < 20; ++p)
    for (int t = 0; t < 3; ++t)
      pool.push_back(scored("p" + std::to_string(p), "t" + std::to_string(p * 3 + t), rng.uniform()));
  auto mean = [](const std::vector<Selection>& s) {
    double total = 0.0;
    for (const auto& x : s) total += x.score;
    return total / static_cast<double>(s.size());
  };
  const auto best = best_of_n(pool, SelectionMode::Best);
  const auto worst = best_of_n(pool, SelectionMode::Worst);
  double random_total = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = best_of_n(pool, SelectionMode::Random, seed);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(r[i].score <= best[i].score);
      CHECK(r[i].score >= worst[i].score);
    }
    random_total += mean(r);
  }
  const double random_mean = random_total / 200.0;
  CHECK(mean(best) >= random_mean);
  CHECK(random_mean >= mean(worst));
}

TEST_CASE("baseline examples", "[baselines]") {
  const TraceCache c = with_entropies({0.1, 0.2, 0.3, 0.4}, 2);
  CHECK(entropy_sum(c) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(compute_baselines(c).length == 4);

  const TraceCache flat = with_entropies(std::vector<double>(8, 0.7), 2);
  CHECK(entropy_sum(flat) == Catch::Approx(8 * 0.7));
  CHECK(top20_entropy_fraction(flat) == 1.0);

  TraceCache lp = testing_support::make_cache(std::vector<testing_support::TokenActs>(2), 2);
  lp.tokens[0].logprob = -1.0;
  lp.tokens[1].logprob = -3.0;
  CHECK(mean_logprob(lp) == -2.0);

  TraceCache missing = c;
  missing.tokens[1].entropy.reset();
  missing.tokens[2].logprob.reset();
  try {
    entropy_sum(missing);
    FAIL("missing entropy not reported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingEntropy);
  }
  try {
    mean_logprob(missing);
    FAIL("missing logprob not reported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingLogprob);
  }
}

TEST_CASE("property: baseline invariants", "[baselines][property]") {
  Rng rng(65);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + rng.index(40)), b(1 + rng.index(40));
    for (auto& v : a) v = rng.uniform() * 3;
    for (auto& v : b) v = rng.uniform() * 3;
    std::vector<double> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    CHECK(entropy_sum(with_entropies(ab, 4)) ==
          Catch::Approx(entropy_sum(with_entropies(a, 4)) + entropy_sum(with_entropies(b, 4))).epsilon(1e-12));

    const double f = top20_entropy_fraction(with_entropies(a, 2));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    std::vector<double> shifted = a;
    for (auto& v : shifted) v += 0.5;
    CHECK(top20_entropy_fraction(with_entropies(shifted, 2)) == f);
  }
}
