#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "nex/nex.hpp"

namespace nex::cli {

using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Whole output is built in memory and written once, so a failed run never
// leaves a half-written file behind.
void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::size_t jobs_of(const RunConfig& config) { return config.jobs == 0 ? default_jobs() : config.jobs; }

json input_digests(const std::vector<fs::path>& paths) {
  json inputs = json::array();
  for (const auto& p : paths) inputs.push_back({{"name", p.filename().string()}, {"sha256", file_sha256(p)}});
  return inputs;
}

// Thread count never changes results, so it stays out of the echoed config.
json effective_config(const RunConfig& config) {
  json cfg = config.to_json();
  cfg.erase("jobs");
  return cfg;
}

json provenance(const RunConfig& config, const std::vector<fs::path>& inputs) {
  const json cfg = effective_config(config);
  return {{"config", cfg}, {"config_hash", sha256_hex(cfg.dump())}, {"inputs", input_digests(inputs)}};
}

std::string csv_preamble(const json& prov) {
  std::string line = "# config_hash=" + prov["config_hash"].get<std::string>();
  for (const auto& in : prov["inputs"])
    line += " " + in["name"].get<std::string>() + "=" + in["sha256"].get<std::string>();
  return line + "\n";
}

// Shortest round-trip representation, same as the JSON writer uses.
std::string num(double v) {
  json j = v;
  return j.dump();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<TraceCache> load_caches(const std::vector<fs::path>& paths, std::size_t jobs) {
  std::vector<TraceCache> caches(paths.size());
  parallel_for(paths.size(), jobs, [&](std::size_t i) {
    try {
      caches[i] = load_cache(paths[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), paths[i].string() + ": " + e.message(), e.line());
    }
  });
  return caches;
}

io::ScoresFile load_scores(const fs::path& path) {
  std::istringstream in(read_file(path));
  try {
    return io::read_scores(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message(), e.line());
  }
}

std::vector<io::AccuracyRecord> load_accuracies(const fs::path& path) {
  std::istringstream in(read_file(path));
  try {
    return io::read_accuracies(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message(), e.line());
  }
}

std::string safe_name(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return out.empty() ? "_" : out;
}

// Method name -> per-candidate value, averaged like the NEX score: first
// within each prompt, then across prompts.
using MethodTable = std::map<std::string, std::map<std::string, double>>;

const std::vector<std::string> kMethods = {"nex", "length", "hes", "top20_fraction", "mean_logprob"};

MethodTable candidate_means(const std::vector<io::ScoreLine>& lines) {
  std::map<std::string, std::vector<const io::ScoreLine*>> by_model;
  for (const auto& l : lines) by_model[l.response.model_id].push_back(&l);
  MethodTable table;
  for (const auto& [model, group] : by_model) {
    for (const auto& method : kMethods) {
      std::vector<ScoredResponse> proxy;
      bool complete = true;
      for (const auto* l : group) {
        ScoredResponse s = l->response;
        if (method != "nex") {
          if (!l->baselines.is_object() || !l->baselines.contains(method) || !l->baselines[method].is_number()) {
            complete = false;
            break;
          }
          s.record.score = l->baselines[method].get<double>();
        }
        proxy.push_back(std::move(s));
      }
      if (complete && !proxy.empty()) table[method][model] = aggregate_scores(proxy).mean;
    }
  }
  return table;
}

struct GroupKey {
  std::string series;
  std::string benchmark;
  auto operator<=>(const GroupKey&) const = default;
};

std::map<GroupKey, std::vector<const io::AccuracyRecord*>> group_accuracies(
    const std::vector<io::AccuracyRecord>& records) {
  std::map<GroupKey, std::vector<const io::AccuracyRecord*>> groups;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& a : records) {
    if (!seen.insert({a.series, a.benchmark, a.candidate_id}).second)
      throw Error(ErrorKind::MalformedRecord, "duplicate accuracy for candidate \"" + a.candidate_id +
                                                  "\" on benchmark \"" + a.benchmark + "\"");
    groups[{a.series, a.benchmark}].push_back(&a);
  }
  return groups;
}

std::vector<io::ScoreLine> gather_scores(const std::vector<fs::path>& files) {
  std::vector<io::ScoreLine> lines;
  for (const auto& f : files) {
    auto file = load_scores(f);
    for (auto& l : file.lines) lines.push_back(std::move(l));
  }
  return lines;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw InvariantViolation("SHA-256 computation failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::vector<fs::path> collect_caches(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > 15 && name.ends_with(".nexcache.jsonl"))
          found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      out.push_back(in);
    } else {
      throw Error(ErrorKind::Io, "no such file or directory: " + in.string());
    }
  }
  return out;
}

int cmd_validate(const std::vector<fs::path>& inputs, std::ostream& out) {
  const auto paths = collect_caches(inputs);
  if (paths.empty()) {
    out << "warning: no .nexcache.jsonl files found\n";
    return kOk;
  }
  std::size_t bad = 0;
  for (const auto& p : paths) {
    try {
      const TraceCache c = load_cache(p);
      if (c.size() == 0) throw Error(ErrorKind::EmptyTrace, "trace has no tokens");
      out << "ok " << p.string() << " trace=" << c.trace_id << " tokens=" << c.size() << "\n";
    } catch (const Error& e) {
      ++bad;
      out << "error " << p.string() << ": " << e.what() << "\n";
    }
  }
  out << paths.size() - bad << "/" << paths.size() << " caches valid\n";
  return bad ? kInputError : kOk;
}

int cmd_learn_weights(const std::vector<fs::path>& miniset, const fs::path& out_path, const RunConfig& config,
                      const std::string& miniset_id, std::ostream& log) {
  const auto paths = collect_caches(miniset);
  if (paths.empty()) throw Error(ErrorKind::EmptySet, "mini-set contains no caches");
  const auto caches = load_caches(paths, jobs_of(config));
  const LearnResult result = learn_weights(caches, config.pipeline(), jobs_of(config), miniset_id);

  std::ostringstream text;
  io::write_weights(text, result.weights, provenance(config, paths));
  write_file(out_path, text.str());

  log << "traces=" << result.traces << " short=" << result.short_traces << " cycles=" << result.cycles
      << " gated=" << result.gated_cycles << " effective=" << result.effective_cycles
      << " neurons=" << result.weights.entries().size() << "\n";
  if (result.weights.entries().empty()) log << "warning: no neuron received credit; weights file is empty\n";
  return kOk;
}

int cmd_score(const fs::path& weights_path, const std::vector<fs::path>& caches_in, const fs::path& out_path,
              const RunConfig& config, const std::optional<std::string>& pool_id, std::ostream& log) {
  std::istringstream win(read_file(weights_path));
  const io::WeightsFile wf = io::read_weights(win);
  const auto paths = collect_caches(caches_in);
  const auto caches = load_caches(paths, jobs_of(config));

  std::vector<ResponseSummary> summaries(caches.size());
  std::vector<json> baselines(caches.size());
  parallel_for(caches.size(), jobs_of(config), [&](std::size_t i) {
    summaries[i] = summarize(caches[i]);
    baselines[i] = io::baselines_json(caches[i]);
  });
  if (pool_id) score_data(summaries, wf.weights, *pool_id);  // overlap check only

  std::vector<std::size_t> order(caches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = summaries[a];
    const auto& y = summaries[b];
    return std::tie(x.model_id, x.prompt_id, x.trace_id) < std::tie(y.model_id, y.prompt_id, y.trace_id);
  });

  std::vector<fs::path> inputs{weights_path};
  inputs.insert(inputs.end(), paths.begin(), paths.end());
  json header = provenance(config, inputs);
  header["type"] = "header";
  header["weights_miniset_id"] = wf.weights.miniset_id;
  if (pool_id) header["pool_id"] = *pool_id;

  std::ostringstream text;
  text << header.dump() << '\n';
  std::map<std::string, std::vector<ScoredResponse>> by_model;
  for (std::size_t i : order) {
    const ScoredResponse s = score_summary(summaries[i], wf.weights);
    text << io::score_json(s, baselines[i]).dump() << '\n';
    by_model[s.model_id].push_back(s);
  }
  write_file(out_path, text.str());

  if (caches.empty()) log << "warning: no caches to score\n";
  for (const auto& [model, scored] : by_model) {
    const ModelScore m = aggregate_scores(scored);
    log << "model=" << model << " responses=" << scored.size() << " prompts=" << m.per_prompt.size()
        << " mean_score=" << num(m.mean) << "\n";
  }
  return kOk;
}

int cmd_rank(const std::vector<fs::path>& score_files, const fs::path& accuracies, const fs::path& out_path,
             std::ostream& log) {
  const auto lines = gather_scores(score_files);
  const auto accs = load_accuracies(accuracies);
  const MethodTable means = candidate_means(lines);

  std::vector<fs::path> inputs = score_files;
  inputs.push_back(accuracies);
  json report = {{"type", "ranking"}, {"inputs", input_digests(inputs)}, {"groups", json::array()}};

  struct Totals {
    double r_sum = 0.0;
    std::size_t r_count = 0;
    double regret_sum = 0.0;
    std::size_t hits = 0;
    std::size_t groups = 0;
  };
  std::map<std::string, Totals> totals;

  for (const auto& [key, group] : group_accuracies(accs)) {
    json g = {{"series", key.series}, {"benchmark", key.benchmark}, {"methods", json::object()}};
    for (const auto& method : kMethods) {
      auto mit = means.find(method);
      if (mit == means.end()) continue;
      std::vector<Candidate> cands;
      for (const auto* a : group) {
        auto sit = mit->second.find(a->candidate_id);
        if (sit != mit->second.end()) cands.push_back({a->candidate_id, sit->second, a->accuracy_pp});
      }
      if (cands.empty()) continue;
      const RankingReport r = rank_candidates(cands);
      json m = {{"pearson_r", r.pearson_r ? json(*r.pearson_r) : json(nullptr)},
                {"regret_at_1", r.regret_at_1},
                {"hit_at_3", r.hit_at_3},
                {"candidates", json::array()}};
      for (const auto& c : r.candidates)
        m["candidates"].push_back({{"id", c.id}, {"score", c.score}, {"accuracy_pp", c.accuracy}});
      g["methods"][method] = m;
      auto& t = totals[method];
      if (r.pearson_r) {
        t.r_sum += *r.pearson_r;
        ++t.r_count;
      }
      t.regret_sum += r.regret_at_1;
      t.hits += static_cast<std::size_t>(r.hit_at_3);
      ++t.groups;
    }
    std::size_t missing = 0;
    for (const auto* a : group)
      if (!means.count("nex") || !means.at("nex").count(a->candidate_id)) ++missing;
    if (missing)
      log << "warning: " << missing << " candidate(s) in " << key.series << "/" << key.benchmark
          << " have no scores\n";
    report["groups"].push_back(std::move(g));
  }

  json summary = json::object();
  log << std::left << std::setw(16) << "method" << std::setw(10) << "r" << std::setw(12) << "regret@1"
      << "hit@3\n";
  for (const auto& method : kMethods) {
    auto it = totals.find(method);
    if (it == totals.end()) continue;
    const Totals& t = it->second;
    const json r = t.r_count ? json(t.r_sum / static_cast<double>(t.r_count)) : json(nullptr);
    const double regret = t.regret_sum / static_cast<double>(t.groups);
    summary[method] = {{"mean_pearson_r", r}, {"mean_regret_at_1", regret}, {"hits_at_3", t.hits}, {"groups", t.groups}};
    std::ostringstream rs;
    if (t.r_count)
      rs << std::fixed << std::setprecision(3) << t.r_sum / static_cast<double>(t.r_count);
    else
      rs << "n/a";
    std::ostringstream gs;
    gs << std::fixed << std::setprecision(2) << regret;
    log << std::setw(16) << method << std::setw(10) << rs.str() << std::setw(12) << gs.str() << t.hits << "/"
        << t.groups << "\n";
  }
  report["summary"] = summary;
  write_file(out_path, report.dump(2) + "\n");
  return kOk;
}

int cmd_curate(const fs::path& score_file, double fraction, const fs::path& out_path, std::ostream& log) {
  const auto file = load_scores(score_file);
  std::vector<RankedSample> samples;
  std::set<std::string> ids;
  for (const auto& l : file.lines) {
    if (!ids.insert(l.response.trace_id).second)
      throw Error(ErrorKind::MalformedRecord, "duplicate trace id \"" + l.response.trace_id + "\"");
    samples.push_back({l.response.trace_id, l.response.record.score});
  }
  const auto kept = curate(samples, fraction);
  json manifest = {{"type", "curation"},
                   {"fraction", fraction},
                   {"pool_size", samples.size()},
                   {"retained", kept.size()},
                   {"inputs", input_digests({score_file})},
                   {"ids", json::array()},
                   {"scores", json::array()}};
  for (const auto& s : kept) {
    manifest["ids"].push_back(s.id);
    manifest["scores"].push_back(s.score);
  }
  write_file(out_path, manifest.dump(2) + "\n");
  log << "retained " << kept.size() << " of " << samples.size() << "\n";
  if (samples.empty()) log << "warning: score file has no records\n";
  return kOk;
}

int cmd_synth(const SynthRequest& req, const fs::path& out_dir, const RunConfig& config, std::ostream& log) {
  synth::SynthConfig base;
  base.rows = req.rows;
  base.cycles = req.cycles;
  base.row_width = req.row_width;
  base.reuse = req.reuse;
  base.lambda_explore = req.lambda_explore;
  base.lambda_exploit = req.lambda_exploit;
  base.p_stay = req.p_stay;
  base.model_id = req.model_id;
  base.seed = req.seed;
  base.validate();
  fs::create_directories(out_dir);

  if (!req.sweep.empty()) {
    synth::SweepOptions opts;
    const std::size_t pool = opts.base.pool_size;
    opts.base = base;
    opts.base.pool_size = pool;
    opts.trials = req.trials;
    opts.pipeline = config.pipeline();
    opts.jobs = jobs_of(config);
    std::vector<synth::SweepLevel> levels;
    if (req.sweep == "reuse") {
      const std::size_t c = req.cycles ? req.cycles : 6;
      levels = {{0.9, c}, {0.5, c}, {0.1, c}};
    } else if (req.sweep == "segments") {
      levels = {{req.reuse, 1}, {req.reuse, 2}, {req.reuse, 4}, {req.reuse, 8}, {req.reuse, 16}};
    } else {
      throw Error(ErrorKind::InvalidArgument, "--sweep must be \"reuse\" or \"segments\"");
    }
    const auto rows = synth::sweep_exploration(levels, opts);
    std::ostringstream csv;
    csv << "# config_hash=" << sha256_hex(effective_config(config).dump()) << " seed=" << req.seed
        << " trials=" << req.trials << "\n";
    csv << "reuse,cycles,mean_explore_segments,mean_score,mean_proxy\n";
    for (const auto& r : rows) {
      csv << num(r.level.reuse) << "," << r.level.cycles << "," << num(r.mean_explore_segments) << ","
          << num(r.mean_score) << "," << num(r.mean_proxy) << "\n";
      log << "reuse=" << r.level.reuse << " cycles=" << r.level.cycles << " segments=" << r.mean_explore_segments
          << " score=" << r.mean_score << " proxy=" << r.mean_proxy << "\n";
    }
    write_file(out_dir / ("sweep-" + req.sweep + ".csv"), csv.str());
    return kOk;
  }

  const synth::Universe universe(base.pool_size, base.background_size, base.universe_seed);
  std::vector<synth::SynthTrace> traces(req.count);
  parallel_for(req.count, jobs_of(config), [&](std::size_t i) {
    synth::SynthConfig c = base;
    c.seed = derive_seed(req.seed, i);
    std::ostringstream id;
    id << "synth-" << std::setw(4) << std::setfill('0') << i;
    c.trace_id = id.str();
    c.prompt_id = "prompt-" + id.str().substr(6);
    traces[i] = synth::generate(c, universe);
  });
  for (const auto& t : traces) {
    std::ostringstream cache;
    write_cache(cache, t.cache);
    write_file(out_dir / (t.cache.trace_id + ".nexcache.jsonl"), cache.str());

    std::ostringstream truth;
    json header = {{"type", "header"}, {"trace_id", t.cache.trace_id}, {"seed", req.seed}};
    truth << header.dump() << '\n';
    for (std::size_t r = 0; r < t.truth.states.size(); ++r)
      truth << json{{"type", "row"},
                    {"r", r},
                    {"state", std::string(1, phase_letter(t.truth.states[r]))},
                    {"new", t.truth.new_per_row[r]}}
                   .dump()
            << '\n';
    for (std::size_t i = 0; i < t.truth.cycles.size(); ++i) {
      const auto& c = t.truth.cycles[i];
      truth << json{{"type", "cycle"},
                    {"index", i},
                    {"explore_begin", c.explore_begin},
                    {"explore_end", c.explore_end},
                    {"exploit_end", c.exploit_end},
                    {"productive", c.productive},
                    {"introduced", c.introduced}}
                   .dump()
            << '\n';
    }
    for (const auto& [key, kind] : t.truth.introduced)
      truth << json{{"type", "neuron"}, {"key", key.packed}, {"kind", synth::kind_name(kind)}}.dump() << '\n';
    write_file(out_dir / (t.cache.trace_id + ".truth.jsonl"), truth.str());
  }
  log << "wrote " << traces.size() << " traces to " << out_dir.string() << "\n";
  return kOk;
}

int cmd_report(const ReportRequest& req, const fs::path& out_dir, const RunConfig& config, std::ostream& log) {
  fs::create_directories(out_dir);
  const auto cache_paths = collect_caches(req.caches);
  std::vector<fs::path> inputs = cache_paths;
  inputs.insert(inputs.end(), req.scores.begin(), req.scores.end());
  if (req.accuracies) inputs.push_back(*req.accuracies);
  const std::string preamble = csv_preamble(provenance(config, inputs));

  // Score vs accuracy scatter, one point per (series, benchmark, candidate).
  std::ostringstream scatter;
  scatter << preamble << "series,benchmark,candidate,nex_score,accuracy_pp\n";
  std::size_t points = 0;
  if (!req.scores.empty() && req.accuracies) {
    const MethodTable means = candidate_means(gather_scores(req.scores));
    const auto accs = load_accuracies(*req.accuracies);
    if (auto nex = means.find("nex"); nex != means.end())
      for (const auto& [key, group] : group_accuracies(accs)) {
        std::vector<const io::AccuracyRecord*> sorted = group;
        std::sort(sorted.begin(), sorted.end(),
                  [](auto* a, auto* b) { return a->candidate_id < b->candidate_id; });
        for (const auto* a : sorted) {
          auto it = nex->second.find(a->candidate_id);
          if (it == nex->second.end()) continue;
          scatter << csv_field(key.series) << "," << csv_field(key.benchmark) << "," << csv_field(a->candidate_id)
                  << "," << num(it->second) << "," << num(a->accuracy_pp) << "\n";
          ++points;
        }
      }
  }
  write_file(out_dir / "score_vs_accuracy.csv", scatter.str());

  // Slope series and segment overlays for every cache.
  const auto caches = load_caches(cache_paths, jobs_of(config));
  std::vector<TraceAnalysis> analyses(caches.size());
  parallel_for(caches.size(), jobs_of(config),
               [&](std::size_t i) { analyses[i] = analyze_trace(caches[i], config.pipeline()); });
  std::vector<std::size_t> order(caches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return caches[a].trace_id < caches[b].trace_id; });

  std::ostringstream slopes;
  std::ostringstream segments;
  slopes << preamble << "trace_id,r,s,z,state\n";
  segments << preamble << "trace_id,cycle,phase,begin_row,end_row,reuse_share,progress,consolidation,strength,gate\n";
  for (std::size_t i : order) {
    const auto& a = analyses[i];
    const std::string id = csv_field(a.trace_id);
    std::ostringstream dump;
    for (std::size_t r = 0; r < a.slopes.size(); ++r) {
      const char state = phase_letter(a.segmentation.states[r]);
      slopes << id << "," << r << "," << num(a.slopes.raw[r]) << "," << num(a.slopes.processed[r]) << ","
             << state << "\n";
      dump << json{{"r", r}, {"s", a.slopes.raw[r]}, {"z", a.slopes.processed[r]}, {"state", std::string(1, state)}}
                  .dump()
           << '\n';
    }
    write_file(out_dir / (safe_name(a.trace_id) + ".slopes.jsonl"), dump.str());
    for (std::size_t c = 0; c < a.segmentation.cycles.size(); ++c) {
      const Cycle& cy = a.segmentation.cycles[c];
      const CycleCredit& cr = a.credits[c];
      const std::string credit = "," + num(cr.reuse_share) + "," + num(cr.progress) + "," + num(cr.consolidation) +
                                 "," + num(cr.strength) + "," + (cr.gate ? "1" : "0");
      segments << id << "," << c << ",E," << cy.explore_begin << "," << cy.explore_end << credit << "\n";
      segments << id << "," << c << ",X," << cy.exploit_begin << "," << cy.exploit_end << credit << "\n";
    }
  }
  write_file(out_dir / "slopes.csv", slopes.str());
  write_file(out_dir / "segments.csv", segments.str());

  if (caches.empty() && points == 0) log << "warning: no inputs; report files contain headers only\n";
  log << "points=" << points << " traces=" << caches.size() << "\n";
  return kOk;
}

}  // namespace nex::cli
