#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "nex/cache.hpp"

namespace testing_support {

using TokenActs = std::vector<std::pair<std::uint32_t, double>>;

// Cache with the given per-token activations; entropy and logprob filled
// with simple values unless disabled.
inline nex::TraceCache make_cache(const std::vector<TokenActs>& tokens, std::size_t width,
                                  std::string trace_id = "t", std::string prompt_id = "p",
                                  std::string model_id = "m") {
  nex::TraceCache c;
  c.trace_id = std::move(trace_id);
  c.prompt_id = std::move(prompt_id);
  c.model_id = std::move(model_id);
  c.row_width = width;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    nex::TokenRecord rec;
    rec.position = t;
    rec.entropy = 1.0 + static_cast<double>(t % 3);
    rec.logprob = -0.1 * static_cast<double>(t % 4);
    for (const auto& [k, m] : tokens[t]) rec.activations.push_back({nex::NeuronKey(k), m});
    std::stable_sort(rec.activations.begin(), rec.activations.end(),
                     [](const nex::Activation& a, const nex::Activation& b) { return a.mass > b.mass; });
    c.tokens.push_back(std::move(rec));
  }
  return c;
}

// Two tokens per row, neurons 1..5:
//   row 0: {1:2, 2:1} {1:1, 3:0.5}  -> A = {1:3, 2:1, 3:0.5}      new {1,2,3}
//   row 1: {4:2, 1:1} {2:0.5}       -> A = {1:1, 2:0.5, 4:2}      new {4}
//   row 2: {1:1.5, 5:1} {4:0.5, 2:0.5} -> A = {1:1.5, 2:0.5, 4:0.5, 5:1}  new {5}
inline nex::TraceCache three_row_fixture() {
  return make_cache({{{1, 2.0}, {2, 1.0}},
                     {{1, 1.0}, {3, 0.5}},
                     {{4, 2.0}, {1, 1.0}},
                     {{2, 0.5}},
                     {{1, 1.5}, {5, 1.0}},
                     {{4, 0.5}, {2, 0.5}}},
                    2);
}

}  // namespace testing_support
