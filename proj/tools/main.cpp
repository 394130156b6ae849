#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "commands.hpp"
#include "nex/error.hpp"

namespace {

using nex::RunConfig;
namespace cli = nex::cli;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::vector<std::string> overrides;
};

RunConfig effective_config(const Globals& g) {
  RunConfig cfg;
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("NEX_CONFIG"); env && *env) path = env;
  if (!path.empty()) cfg = RunConfig::load(path);
  for (const auto& o : g.overrides) cfg.apply_override(o);
  if (g.seed) cfg.hmm_seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  return cfg;
}

void require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw nex::Error(nex::ErrorKind::InvalidArgument, std::string("--out is required for ") + what);
}

std::vector<cli::fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nex: label-free reasoning-trace scoring"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (default: $NEX_CONFIG)");
  app.add_option("--seed", g.seed, "Seed for GMM initialisation and synthetic generation");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");

  std::vector<std::string> inputs;

  auto* validate = app.add_subcommand("validate", "Parse and check activation caches");
  validate->add_option("paths", inputs, "Cache files or directories")->required();

  std::string miniset_id;
  auto* learn = app.add_subcommand("learn-weights", "Learn signed neuron weights from a mini-set");
  learn->add_option("miniset", inputs, "Mini-set directory or cache files")->required();
  learn->add_option("--miniset-id", miniset_id, "Identifier recorded in the weights header");

  std::string weights;
  std::optional<std::string> pool_id;
  auto* score = app.add_subcommand("score", "Score caches with a weights file");
  score->add_option("--weights", weights, "Weights file")->required();
  score->add_option("caches", inputs, "Cache files or directories")->required();
  score->add_option("--pool-id", pool_id, "Curation pool id; rejects overlap with the weights' mini-set");

  std::string accuracies;
  auto* rank = app.add_subcommand("rank", "Join scores with benchmark accuracies");
  rank->add_option("scores", inputs, "Score files")->required();
  rank->add_option("--accuracies", accuracies, "Accuracies file")->required();

  std::optional<double> fraction;
  auto* curate = app.add_subcommand("curate", "Keep the top fraction of a scored pool");
  curate->add_option("scores", inputs, "Score file")->required()->expected(1);
  curate->add_option("--fraction", fraction, "Retained fraction (default: scoring.curate_fraction)");

  cli::SynthRequest sreq;
  auto* synth = app.add_subcommand("synth", "Generate synthetic traces or run a sweep");
  synth->add_option("--count", sreq.count, "Number of traces");
  synth->add_option("--rows", sreq.rows, "Rows per trace (Markov mode)");
  synth->add_option("--cycles", sreq.cycles, "Exact cycle count (0 = Markov mode)");
  synth->add_option("--row-width", sreq.row_width, "Tokens per row");
  synth->add_option("--reuse", sreq.reuse, "Probability an explore phase is productive");
  synth->add_option("--lambda-e", sreq.lambda_explore, "Mean new neurons per explore row");
  synth->add_option("--lambda-x", sreq.lambda_exploit, "Mean new neurons per exploit row");
  synth->add_option("--p-stay", sreq.p_stay, "Phase persistence probability");
  synth->add_option("--model-id", sreq.model_id, "model_id written to cache headers");
  synth->add_option("--sweep", sreq.sweep, "Run a sweep instead: reuse | segments");
  synth->add_option("--trials", sreq.trials, "Trials per sweep level");

  cli::ReportRequest rreq;
  std::vector<std::string> report_caches, report_scores;
  std::string report_acc;
  auto* report = app.add_subcommand("report", "Write plot-data CSVs");
  report->add_option("--caches", report_caches, "Cache files or directories");
  report->add_option("--scores", report_scores, "Score files");
  report->add_option("--accuracies", report_acc, "Accuracies file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  try {
    const RunConfig cfg = effective_config(g);
    if (validate->parsed()) return cli::cmd_validate(to_paths(inputs), std::cout);
    if (learn->parsed()) {
      require_out(g, "learn-weights");
      return cli::cmd_learn_weights(to_paths(inputs), g.out, cfg, miniset_id, std::cerr);
    }
    if (score->parsed()) {
      require_out(g, "score");
      return cli::cmd_score(weights, to_paths(inputs), g.out, cfg, pool_id, std::cerr);
    }
    if (rank->parsed()) {
      require_out(g, "rank");
      return cli::cmd_rank(to_paths(inputs), accuracies, g.out, std::cout);
    }
    if (curate->parsed()) {
      require_out(g, "curate");
      return cli::cmd_curate(inputs.front(), fraction.value_or(cfg.scoring_curate_fraction), g.out, std::cerr);
    }
    if (synth->parsed()) {
      require_out(g, "synth");
      if (g.seed) sreq.seed = *g.seed;
      return cli::cmd_synth(sreq, g.out, cfg, std::cerr);
    }
    if (report->parsed()) {
      require_out(g, "report");
      rreq.caches = to_paths(report_caches);
      rreq.scores = to_paths(report_scores);
      if (!report_acc.empty()) rreq.accuracies = report_acc;
      return cli::cmd_report(rreq, g.out, cfg, std::cerr);
    }
  } catch (const nex::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [Io]: " << e.what() << "\n";
    return cli::kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return cli::kInternalError;
  }
  return cli::kInternalError;
}
