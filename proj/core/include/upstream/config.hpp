#pragma once

#include <optional>
#include <string>

#include "upstream/env.hpp"
#include "upstream/evaluate.hpp"
#include "upstream/policy.hpp"
#include "upstream/trainer.hpp"

namespace upstream {

struct CatalogRef {
  std::string path;   // fixed catalog CSV; empty = generate
  int n_leads = 20;
};

struct EvaluationConfig {
  long episodes = 10000;
  int workers = 1;
  std::vector<int> n_firms_sweep = {2, 4, 6, 8, 10};
  std::string focal_policy = "RlOptimized";
  std::string opponent_policy = "StandardLadder";
  LadderParams ladder;  // parameters for StandardLadder roles
};

// Whole-run configuration: strict schema, unknown keys rejected, every field
// serializable so that parse -> serialize -> parse is the identity.
struct RunConfig {
  std::uint64_t master_seed = 42;
  std::string output_dir = "out";
  std::string profile_csv = "data/firm_profiles.csv";
  CatalogRef catalog;
  GameConfig game;
  TrainerConfig trainer;
  BootstrapSpec bootstrap;
  EvaluationConfig evaluation;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::string& path);

// Named hyperparameter presets. "appendix-defaults" is the shipped default;
// "grid-search-2021" switches to alpha=0.01, gamma=0.50, epsilon start 0.9.
void apply_preset(RunConfig& config, const std::string& preset);

// FNV-1a over the canonical serialized form; stable across runs.
std::string config_hash(const RunConfig& config);

// Output-directory manifest: config hash, seed and the full config, so a run
// can be reproduced bit-exactly from its artifacts.
void write_manifest(const RunConfig& config, const std::string& out_dir);

}  // namespace upstream
