#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nex/config.hpp"

namespace nex::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInputError = 1, kInternalError = 2 };

// Expands directories into their *.nexcache.jsonl files (sorted); plain
// files pass through.
std::vector<fs::path> collect_caches(const std::vector<fs::path>& inputs);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const fs::path& path);

int cmd_validate(const std::vector<fs::path>& inputs, std::ostream& out);

int cmd_learn_weights(const std::vector<fs::path>& miniset, const fs::path& out_path, const RunConfig& config,
                      const std::string& miniset_id, std::ostream& log);

// `pool_id` switches on curation mode: the pool must be disjoint from the
// weights' mini-set.
int cmd_score(const fs::path& weights_path, const std::vector<fs::path>& caches, const fs::path& out_path,
              const RunConfig& config, const std::optional<std::string>& pool_id, std::ostream& log);

int cmd_rank(const std::vector<fs::path>& score_files, const fs::path& accuracies, const fs::path& out_path,
             std::ostream& log);

int cmd_curate(const fs::path& score_file, double fraction, const fs::path& out_path, std::ostream& log);

struct SynthRequest {
  std::size_t count = 10;
  std::size_t rows = 80;
  std::size_t cycles = 0;
  std::size_t row_width = 32;
  double reuse = 0.5;
  double lambda_explore = 8.0;
  double lambda_exploit = 1.0;
  double p_stay = 0.9;
  std::uint64_t seed = 0;
  std::string model_id = "synth-model";
  std::string sweep;  // "", "reuse" or "segments"
  std::size_t trials = 30;
};

int cmd_synth(const SynthRequest& request, const fs::path& out_dir, const RunConfig& config, std::ostream& log);

struct ReportRequest {
  std::vector<fs::path> caches;
  std::vector<fs::path> scores;
  std::optional<fs::path> accuracies;
};

int cmd_report(const ReportRequest& request, const fs::path& out_dir, const RunConfig& config, std::ostream& log);

}  // namespace nex::cli
