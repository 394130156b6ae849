#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nex/baselines.hpp"
#include "nex/cache.hpp"
#include "nex/credit.hpp"
#include "nex/scoring.hpp"

namespace nex::io {

using nlohmann::json;

namespace detail {

inline std::vector<std::pair<std::size_t, json>> read_json_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, json>> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.emplace_back(line, json::parse(text));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord, std::string("invalid JSON: ") + e.what(), line);
    }
    if (!out.back().second.is_object()) throw Error(ErrorKind::MalformedRecord, "record is not an object", line);
  }
  return out;
}

inline double number_field(const json& rec, const char* field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_number())
    throw Error(ErrorKind::MalformedRecord, std::string("field \"") + field + "\" must be a number", line);
  return it->get<double>();
}

inline std::string string_field(const json& rec, const char* field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_string())
    throw Error(ErrorKind::MalformedRecord, std::string("field \"") + field + "\" must be a string", line);
  return it->get<std::string>();
}

}  // namespace detail

// Header carries epsilon, mini-set id and source traces plus any provenance
// fields in `extra`; records follow in ascending key order.
inline void write_weights(std::ostream& out, const NeuronWeights& weights, const json& extra = json::object()) {
  json header = extra;
  header["type"] = "header";
  header["epsilon"] = weights.epsilon();
  header["miniset_id"] = weights.miniset_id;
  header["source_traces"] = weights.source_traces;
  out << header.dump() << '\n';
  for (const auto& [key, acc] : weights.entries()) {
    json rec = {{"type", "neuron"},
                {"key", key.packed},
                {"m_pos", acc.m_pos},
                {"m_neg", acc.m_neg},
                {"w", signed_weight(acc.m_pos, acc.m_neg, weights.epsilon())}};
    out << rec.dump() << '\n';
  }
}

struct WeightsFile {
  NeuronWeights weights;
  json header;
};

inline WeightsFile read_weights(std::istream& in) {
  const auto lines = detail::read_json_lines(in);
  if (lines.empty() || lines.front().second.value("type", "") != "header")
    throw Error(ErrorKind::MalformedRecord, "weights file must start with a header", 1);
  const auto& [hline, header] = lines.front();
  const double eps = detail::number_field(header, "epsilon", hline);
  if (!(eps > 0.0)) throw Error(ErrorKind::MalformedRecord, "epsilon must be > 0", hline);

  WeightsFile file{NeuronWeights(eps), header};
  file.weights.miniset_id = header.value("miniset_id", "");
  if (auto it = header.find("source_traces"); it != header.end()) {
    if (!it->is_array()) throw Error(ErrorKind::MalformedRecord, "source_traces must be an array", hline);
    for (const auto& t : *it) file.weights.source_traces.push_back(t.get<std::string>());
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line, rec] = lines[i];
    if (detail::string_field(rec, "type", line) != "neuron")
      throw Error(ErrorKind::MalformedRecord, "expected a neuron record", line);
    const auto& key = rec.find("key");
    if (key == rec.end() || !key->is_number_unsigned() || key->get<std::uint64_t>() > 0xFFFFFFFFull)
      throw Error(ErrorKind::MalformedRecord, "key must be a 32-bit unsigned integer", line);
    const Accumulator acc{detail::number_field(rec, "m_pos", line), detail::number_field(rec, "m_neg", line)};
    if (acc.m_pos < 0.0 || acc.m_neg < 0.0)
      throw Error(ErrorKind::NegativeMass, "accumulators must be nonnegative", line);
    const NeuronKey k(static_cast<std::uint32_t>(key->get<std::uint64_t>()));
    if (file.weights.find(k)) throw Error(ErrorKind::MalformedRecord, "duplicate neuron key", line);
    file.weights.set(k, acc);
  }
  return file;
}

inline json baselines_json(const TraceCache& cache) {
  json b = {{"length", cache.size()}};
  auto put = [&](const char* name, auto fn) {
    try {
      b[name] = fn();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MissingEntropy && e.kind() != ErrorKind::MissingLogprob) throw;
      b[name] = nullptr;
    }
  };
  put("hes", [&] { return entropy_sum(cache); });
  put("top20_fraction", [&] { return top20_entropy_fraction(cache); });
  put("mean_logprob", [&] { return mean_logprob(cache); });
  return b;
}

struct ScoreLine {
  ScoredResponse response;
  json baselines;  // null when not recorded
};

inline json score_json(const ScoredResponse& s, const json& baselines = nullptr) {
  json rec = {{"type", "score"},
              {"prompt_id", s.prompt_id},
              {"trace_id", s.trace_id},
              {"model_id", s.model_id},
              {"score", s.record.score},
              {"reward", s.record.reward},
              {"bad", s.record.bad},
              {"pos_mass", s.record.pos_mass},
              {"abs_mass", s.record.abs_mass},
              {"tot_mass", s.record.tot_mass}};
  if (!baselines.is_null()) rec["baselines"] = baselines;
  return rec;
}

struct ScoresFile {
  json header;
  std::vector<ScoreLine> lines;
};

// A header line is optional; score records need not carry "type".
inline ScoresFile read_scores(std::istream& in) {
  ScoresFile file;
  for (const auto& [line, rec] : detail::read_json_lines(in)) {
    const std::string type = rec.value("type", "score");
    if (type == "header") {
      file.header = rec;
      continue;
    }
    if (type != "score") throw Error(ErrorKind::MalformedRecord, "unexpected record type \"" + type + "\"", line);
    ScoreLine s;
    s.response.prompt_id = detail::string_field(rec, "prompt_id", line);
    s.response.trace_id = detail::string_field(rec, "trace_id", line);
    s.response.model_id = rec.value("model_id", "");
    s.response.record.score = detail::number_field(rec, "score", line);
    s.response.record.reward = rec.value("reward", 0.0);
    s.response.record.bad = rec.value("bad", 0.0);
    s.response.record.pos_mass = rec.value("pos_mass", 0.0);
    s.response.record.abs_mass = rec.value("abs_mass", 0.0);
    s.response.record.tot_mass = rec.value("tot_mass", 0.0);
    if (auto it = rec.find("baselines"); it != rec.end()) s.baselines = *it;
    file.lines.push_back(std::move(s));
  }
  return file;
}

struct AccuracyRecord {
  std::string candidate_id;
  std::string benchmark;
  std::string series;
  double accuracy_pp = 0.0;
};

inline std::vector<AccuracyRecord> read_accuracies(std::istream& in) {
  std::vector<AccuracyRecord> out;
  for (const auto& [line, rec] : detail::read_json_lines(in)) {
    AccuracyRecord a;
    a.candidate_id = detail::string_field(rec, "candidate_id", line);
    a.benchmark = detail::string_field(rec, "benchmark", line);
    a.series = rec.value("series", "default");
    a.accuracy_pp = detail::number_field(rec, "accuracy_pp", line);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace nex::io
