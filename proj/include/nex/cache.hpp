#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "nex/error.hpp"

namespace nex {

// MLP neuron identifier packed as (layer << 16) | unit.
struct NeuronKey {
  std::uint32_t packed = 0;

  constexpr NeuronKey() = default;
  constexpr explicit NeuronKey(std::uint32_t value) : packed(value) {}

  static constexpr NeuronKey from_parts(std::uint16_t layer, std::uint16_t unit) {
    return NeuronKey((static_cast<std::uint32_t>(layer) << 16) | unit);
  }

  constexpr std::uint16_t layer() const { return static_cast<std::uint16_t>(packed >> 16); }
  constexpr std::uint16_t unit() const { return static_cast<std::uint16_t>(packed & 0xFFFFu); }

  constexpr auto operator<=>(const NeuronKey&) const = default;
};

struct NeuronKeyHash {
  std::size_t operator()(NeuronKey key) const noexcept { return std::hash<std::uint32_t>{}(key.packed); }
};

// One (neuron, nonnegative mass) entry.
struct Activation {
  NeuronKey key;
  double mass = 0.0;

  friend bool operator==(const Activation&, const Activation&) = default;
};

struct TokenRecord {
  std::size_t position = 0;
  std::optional<double> entropy;
  std::optional<double> logprob;
  // Sorted by descending mass, unique keys.
  std::vector<Activation> activations;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

inline constexpr std::size_t kDefaultRowWidth = 32;
inline constexpr std::size_t kDefaultTopK = 2000;

struct TraceCache {
  std::string trace_id;
  std::string prompt_id;
  std::string model_id;
  std::size_t row_width = kDefaultRowWidth;
  std::size_t top_k = kDefaultTopK;
  std::vector<TokenRecord> tokens;

  std::size_t size() const { return tokens.size(); }

  friend bool operator==(const TraceCache&, const TraceCache&) = default;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw Error(ErrorKind::MalformedRecord, std::string("missing field \"") + field + "\"", line);
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* field, std::size_t line) {
  const auto& v = require(obj, field, line);
  if (!v.is_string())
    throw Error(ErrorKind::MalformedRecord, std::string("field \"") + field + "\" must be a string", line);
  return v.get<std::string>();
}

inline std::uint64_t require_unsigned(const nlohmann::json& obj, const char* field, std::size_t line) {
  const auto& v = require(obj, field, line);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw Error(ErrorKind::MalformedRecord,
                std::string("field \"") + field + "\" must be a nonnegative integer", line);
  return v.get<std::uint64_t>();
}

inline std::optional<double> optional_number(const nlohmann::json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number())
    throw Error(ErrorKind::MalformedRecord, std::string("field \"") + field + "\" must be a number or null",
                line);
  return it->get<double>();
}

inline TokenRecord parse_token(const nlohmann::json& rec, std::size_t line, std::size_t expected_position,
                               std::size_t top_k) {
  TokenRecord token;
  const std::uint64_t t = require_unsigned(rec, "t", line);
  if (t != expected_position)
    throw Error(ErrorKind::NonContiguousPositions,
                "expected t=" + std::to_string(expected_position) + ", got t=" + std::to_string(t), line);
  token.position = t;

  token.entropy = optional_number(rec, "entropy", line);
  if (token.entropy && !(*token.entropy >= 0.0))
    throw Error(ErrorKind::MalformedRecord, "entropy must be >= 0", line);
  token.logprob = optional_number(rec, "logprob", line);
  if (token.logprob && !(*token.logprob <= 0.0))
    throw Error(ErrorKind::MalformedRecord, "logprob must be <= 0", line);

  const auto& acts = require(rec, "acts", line);
  if (!acts.is_array()) throw Error(ErrorKind::MalformedRecord, "\"acts\" must be an array", line);
  if (acts.size() > top_k)
    throw Error(ErrorKind::MalformedRecord,
                "token has " + std::to_string(acts.size()) + " activations, top_k is " + std::to_string(top_k),
                line);

  token.activations.reserve(acts.size());
  std::unordered_set<std::uint32_t> seen;
  seen.reserve(acts.size());
  for (const auto& pair : acts) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number())
      throw Error(ErrorKind::MalformedRecord, "each activation must be [key:int, mass:float]", line);
    if (!pair[0].is_number_unsigned() && pair[0].get<std::int64_t>() < 0)
      throw Error(ErrorKind::MalformedRecord, "neuron key must be nonnegative", line);
    const std::uint64_t key = pair[0].get<std::uint64_t>();
    if (key > 0xFFFFFFFFull) throw Error(ErrorKind::MalformedRecord, "neuron key exceeds 32 bits", line);
    const double mass = pair[1].get<double>();
    if (!std::isfinite(mass)) throw Error(ErrorKind::MalformedRecord, "mass must be finite", line);
    if (mass < 0.0)
      throw Error(ErrorKind::NegativeMass, "neuron " + std::to_string(key) + " has mass " + std::to_string(mass),
                  line);
    if (!seen.insert(static_cast<std::uint32_t>(key)).second)
      throw Error(ErrorKind::DuplicateNeuronInToken, "neuron " + std::to_string(key) + " repeated", line);
    if (!token.activations.empty() && mass > token.activations.back().mass)
      throw Error(ErrorKind::MalformedRecord, "activations not sorted by descending mass", line);
    token.activations.push_back({NeuronKey(static_cast<std::uint32_t>(key)), mass});
  }
  return token;
}

}  // namespace detail

// Parses a line-delimited cache stream: one header line followed by token
// lines. Blank lines are skipped; unknown fields are ignored.
inline TraceCache parse_cache(std::istream& in) {
  TraceCache cache;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;

  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord, std::string("invalid JSON: ") + e.what(), line);
    }
    if (!rec.is_object()) throw Error(ErrorKind::MalformedRecord, "record is not a JSON object", line);
    const std::string type = detail::require_string(rec, "type", line);

    if (!have_header) {
      if (type != "header") throw Error(ErrorKind::MalformedRecord, "first record must be the header", line);
      cache.trace_id = detail::require_string(rec, "trace_id", line);
      cache.prompt_id = detail::require_string(rec, "prompt_id", line);
      cache.model_id = detail::require_string(rec, "model_id", line);
      cache.row_width = detail::require_unsigned(rec, "row_width", line);
      cache.top_k = detail::require_unsigned(rec, "top_k", line);
      if (cache.row_width < 1) throw Error(ErrorKind::MalformedRecord, "row_width must be >= 1", line);
      if (cache.top_k < 1) throw Error(ErrorKind::MalformedRecord, "top_k must be >= 1", line);
      have_header = true;
      continue;
    }
    if (type != "token") throw Error(ErrorKind::MalformedRecord, "unexpected record type \"" + type + "\"", line);
    cache.tokens.push_back(detail::parse_token(rec, line, cache.tokens.size(), cache.top_k));
  }
  if (!have_header) throw Error(ErrorKind::MalformedRecord, "missing header record", line == 0 ? 1 : line);
  return cache;
}

inline TraceCache load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_cache(in);
}

inline void write_cache(std::ostream& out, const TraceCache& cache) {
  nlohmann::json header = {{"type", "header"},
                           {"trace_id", cache.trace_id},
                           {"prompt_id", cache.prompt_id},
                           {"model_id", cache.model_id},
                           {"row_width", cache.row_width},
                           {"top_k", cache.top_k}};
  out << header.dump() << '\n';
  for (const auto& token : cache.tokens) {
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& a : token.activations) acts.push_back({a.key.packed, a.mass});
    nlohmann::json rec = {{"type", "token"},
                          {"t", token.position},
                          {"entropy", token.entropy ? nlohmann::json(*token.entropy) : nlohmann::json(nullptr)},
                          {"logprob", token.logprob ? nlohmann::json(*token.logprob) : nlohmann::json(nullptr)},
                          {"acts", std::move(acts)}};
    out << rec.dump() << '\n';
  }
}

// Fixed-width bucket of consecutive tokens with per-neuron summed mass.
struct Row {
  std::size_t index = 0;
  std::size_t begin = 0;  // first token position
  std::size_t end = 0;    // one past the last token position
  // A_{k,r} for every neuron recorded in the row, ascending by key.
  std::vector<Activation> masses;

  std::size_t token_count() const { return end - begin; }

  bool contains(NeuronKey key) const {
    auto it = std::lower_bound(masses.begin(), masses.end(), key,
                               [](const Activation& a, NeuronKey k) { return a.key < k; });
    return it != masses.end() && it->key == key;
  }

  double mass(NeuronKey key) const {
    auto it = std::lower_bound(masses.begin(), masses.end(), key,
                               [](const Activation& a, NeuronKey k) { return a.key < k; });
    return (it != masses.end() && it->key == key) ? it->mass : 0.0;
  }

  double total_mass() const {
    double sum = 0.0;
    for (const auto& a : masses) sum += a.mass;
    return sum;
  }
};

// Sums activations over tokens and returns them ascending by key. Each key's
// sum is accumulated in token order.
inline std::vector<Activation> sum_by_key(std::span<const TokenRecord> tokens) {
  std::vector<std::pair<Activation, std::size_t>> flat;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (const auto& a : tokens[i].activations) flat.push_back({a, i});
  std::sort(flat.begin(), flat.end(), [](const auto& x, const auto& y) {
    return x.first.key != y.first.key ? x.first.key < y.first.key : x.second < y.second;
  });
  std::vector<Activation> out;
  for (const auto& [a, _] : flat) {
    if (!out.empty() && out.back().key == a.key)
      out.back().mass += a.mass;
    else
      out.push_back(a);
  }
  return out;
}

// ceil(T / W) rows; the final row keeps the remainder tokens.
inline std::vector<Row> bucket_rows(const TraceCache& cache) {
  if (cache.tokens.empty()) throw Error(ErrorKind::EmptyTrace, "trace " + cache.trace_id + " has no tokens");
  if (cache.row_width < 1) throw Error(ErrorKind::InvalidArgument, "row_width must be >= 1");
  const std::size_t total = cache.tokens.size();
  const std::size_t width = cache.row_width;
  std::vector<Row> rows;
  rows.reserve((total + width - 1) / width);
  for (std::size_t begin = 0; begin < total; begin += width) {
    Row row;
    row.index = rows.size();
    row.begin = begin;
    row.end = std::min(begin + width, total);
    row.masses = sum_by_key(std::span<const TokenRecord>(cache.tokens).subspan(begin, row.end - begin));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace nex
