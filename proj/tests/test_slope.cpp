#include <catch_amalgamated.hpp>

#include <cmath>

#include "nex/random.hpp"
#include "nex/slope.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nex;
using testing_support::make_cache;
using testing_support::TokenActs;

namespace {

// One token per row carrying the given neuron set; row_width tokens per row
// are padded with empty tokens.
std::vector<Row> rows_with_sets(const std::vector<std::vector<std::uint32_t>>& sets, std::vector<std::size_t> sizes) {
  std::vector<TokenActs> tokens;
  for (std::size_t r = 0; r < sets.size(); ++r) {
    TokenActs first;
    for (auto k : sets[r]) first.push_back({k, 1.0});
    tokens.push_back(first);
    for (std::size_t i = 1; i < sizes[r]; ++i) tokens.emplace_back();
  }
  return bucket_rows(make_cache(tokens, sizes.front()));
}

}  // namespace

TEST_CASE("novelty slopes count first appearances per token", "[slope]") {
  CHECK(novelty_slopes(rows_with_sets({{1, 2, 3}, {2, 3, 4}}, {32, 32})) == std::vector<double>{3.0 / 32, 1.0 / 32});
  CHECK(novelty_slopes(rows_with_sets({{1, 2}, {1, 2}, {1, 2}}, {32, 32, 32})) ==
        std::vector<double>{2.0 / 32, 0.0, 0.0});
  CHECK(novelty_slopes(rows_with_sets({{1}, {2}, {3}}, {32, 32, 8})) ==
        std::vector<double>{1.0 / 32, 1.0 / 32, 1.0 / 8});
}

TEST_CASE("constant slopes standardize to zero", "[slope]") {
  const std::vector<double> s(20, 0.25);
  const SlopeSeries p = preprocess(s);
  for (double z : p.processed) CHECK(z == 0.0);
}

TEST_CASE("single row has no trend", "[slope]") {
  const SlopeSeries p = preprocess(std::vector<double>{0.5});
  CHECK(p.trend_intercept == std::log1p(0.5));
  CHECK(p.trend_slope == 0.0);
  CHECK(p.processed == std::vector<double>{0.0});
}

TEST_CASE("model-matched input leaves zero residuals", "[slope]") {
  std::vector<double> y;
  for (int r = 0; r < 30; ++r) y.push_back(0.5 - 0.1 * std::log1p(r));
  const Detrended d = detrend(y);
  CHECK(d.fit.intercept == Catch::Approx(0.5).margin(1e-12));
  CHECK(d.fit.slope == Catch::Approx(-0.1).margin(1e-12));
  for (double e : d.residuals) CHECK(std::abs(e) < 1e-9);
}

TEST_CASE("preprocessing matches the normal-equation oracle", "[slope][oracle]") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(80);
    std::vector<double> s(n);
    for (auto& v : s) v = rng.uniform() * (rng.bernoulli(0.3) ? 0.05 : 0.5);
    const SlopeSeries got = preprocess(s);
    const oracle::Preprocessed want = oracle::preprocess(s);
    REQUIRE(got.processed.size() == n);
    CHECK(got.trend_intercept == Catch::Approx(want.intercept).margin(1e-9));
    CHECK(got.trend_slope == Catch::Approx(want.slope).margin(1e-9));
    for (std::size_t r = 0; r < n; ++r) CHECK(got.processed[r] == Catch::Approx(want.z[r]).margin(1e-9));
  }
}

TEST_CASE("property: standardized series has median 0 and MAD 1", "[slope][property]") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(5 + rng.index(60));
    for (auto& v : s) v = rng.uniform();
    const SlopeSeries p = preprocess(s);
    REQUIRE(p.scale > 0.0);
    CHECK(std::abs(oracle::sorted_median(p.processed)) < 1e-9);
    CHECK(oracle::sorted_mad(p.processed) == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("property: detrending residuals again finds no trend", "[slope][property]") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(3 + rng.index(60));
    for (auto& v : y) v = rng.normal();
    const Detrended once = detrend(y);
    const Detrended twice = detrend(once.residuals);
    CHECK(std::abs(twice.fit.intercept) < 1e-6);
    CHECK(std::abs(twice.fit.slope) < 1e-6);
  }
}

TEST_CASE("property: nonnegative slopes stay finite and nonnegative after log1p", "[slope][property]") {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + rng.index(40));
    for (auto& v : s) v = rng.bernoulli(0.2) ? 0.0 : rng.uniform() * 10.0;
    for (double v : s) CHECK(std::log1p(v) >= 0.0);
    for (double z : preprocess(s).processed) CHECK(std::isfinite(z));
  }
}
