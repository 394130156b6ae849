#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nex/error.hpp"
#include "nex/pipeline.hpp"

namespace nex {

// Every tunable of a batch run. Loaded from one JSON file (nested objects or
// dotted keys), with key=value overrides applied afterwards.
struct RunConfig {
  double hmm_rho = kDefaultStickiness;
  std::size_t hmm_min_run = kDefaultMinRun;
  std::uint64_t hmm_seed = 0;
  int hmm_em_max_iter = 200;
  double hmm_em_tol = 1e-6;
  double credit_epsilon = kCreditEpsilon;
  bool credit_all_active = false;
  double scoring_curate_fraction = 0.2;
  std::size_t jobs = 0;  // 0: all available cores

  PipelineOptions pipeline() const {
    PipelineOptions p;
    p.segmentation.rho = hmm_rho;
    p.segmentation.min_run = hmm_min_run;
    p.segmentation.gmm = {hmm_seed, hmm_em_max_iter, hmm_em_tol};
    p.credit = {credit_epsilon, credit_all_active};
    return p;
  }

  // Canonical dotted-key form, echoed into output headers.
  nlohmann::json to_json() const {
    return {{"hmm.rho", hmm_rho},
            {"hmm.min_run", hmm_min_run},
            {"hmm.seed", hmm_seed},
            {"hmm.em_max_iter", hmm_em_max_iter},
            {"hmm.em_tol", hmm_em_tol},
            {"credit.epsilon", credit_epsilon},
            {"credit.all_active", credit_all_active},
            {"scoring.curate_fraction", scoring_curate_fraction},
            {"jobs", jobs}};
  }

  void set(const std::string& key, const nlohmann::json& value) {
    auto bad = [&](const char* what) {
      throw Error(ErrorKind::InvalidConfig, "\"" + key + "\" " + what);
    };
    auto number = [&]() {
      if (!value.is_number()) bad("must be a number");
      return value.get<double>();
    };
    auto count = [&]() -> std::uint64_t {
      if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0))
        bad("must be a nonnegative integer");
      return value.get<std::uint64_t>();
    };
    if (key == "hmm.rho") {
      hmm_rho = number();
      if (!(hmm_rho > 0.0 && hmm_rho < 1.0)) bad("must lie in (0, 1)");
    } else if (key == "hmm.min_run") {
      hmm_min_run = count();
    } else if (key == "hmm.seed") {
      hmm_seed = count();
    } else if (key == "hmm.em_max_iter") {
      hmm_em_max_iter = static_cast<int>(count());
      if (hmm_em_max_iter < 1) bad("must be >= 1");
    } else if (key == "hmm.em_tol") {
      hmm_em_tol = number();
      if (!(hmm_em_tol > 0.0)) bad("must be > 0");
    } else if (key == "credit.epsilon") {
      credit_epsilon = number();
      if (!(credit_epsilon > 0.0)) bad("must be > 0");
    } else if (key == "credit.all_active") {
      if (!value.is_boolean()) bad("must be a boolean");
      credit_all_active = value.get<bool>();
    } else if (key == "scoring.curate_fraction") {
      scoring_curate_fraction = number();
      if (!(scoring_curate_fraction >= 0.0 && scoring_curate_fraction <= 1.0)) bad("must lie in [0, 1]");
    } else if (key == "jobs") {
      jobs = count();
    } else {
      throw Error(ErrorKind::InvalidConfig, "unknown config key \"" + key + "\"");
    }
  }

  void merge(const nlohmann::json& doc, const std::string& prefix = {}) {
    if (!doc.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object())
        merge(v, key);
      else
        set(key, v);
    }
  }

  // "key=value" where value is parsed as JSON, falling back to a string.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorKind::InvalidConfig, "override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      value = text;
    }
    set(key, value);
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, std::string("invalid JSON in config: ") + e.what());
    }
    RunConfig cfg;
    cfg.merge(doc);
    return cfg;
  }
};

}  // namespace nex
