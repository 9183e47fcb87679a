#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eagrl/distill.hpp"
#include "eagrl/expert.hpp"
#include "eagrl/mcts.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/rl.hpp"
#include "eagrl/synth_ehr.hpp"

namespace eagrl {

struct EvalConfig {
  int n_bootstrap = 100;
  std::vector<double> p_grid = {0.0, 0.25, 0.5, 1.0};
  ScoreMode score_mode = ScoreMode::kExpectedBucket;
  // Cross-distribution cohort; only distribution_id, n_patients and seed
  // differ from the training spec by default.
  std::string ood_distribution = "B";
  int ood_patients = 200;
};

/// Everything a run needs. Defaults are the method's reference
/// hyperparameters; the root seed fans out to every stage.
struct RunConfig {
  std::uint64_t seed = 42;
  CohortSpec cohort;
  std::array<double, 3> split_ratios = {8.0 / 11.0, 1.0 / 11.0, 2.0 / 11.0};
  ExpertHyper expert;
  int policy_hidden = 32;
  SearchConfig search;
  RewardConfig reward;
  double sft_lr = 0.5;
  int sft_epochs = 30;
  bool balance_classes = false;
  RlConfig rl;
  EvalConfig eval;
  int workers = 1;
};

// Throws ConfigError listing every violated field, one per line.
void validate(const RunConfig& cfg);

// Parses a JSON document; absent keys keep their defaults, unknown keys are
// rejected.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

// Per-stage seeds derived from the root seed.
struct StageSeeds {
  std::uint64_t cohort = 0;
  std::uint64_t split = 0;
  std::uint64_t expert = 0;
  std::uint64_t policy_init = 0;
  std::uint64_t stage1 = 0;
  std::uint64_t stage2 = 0;
  std::uint64_t ood = 0;
  std::uint64_t eval = 0;
};

StageSeeds stage_seeds(std::uint64_t root);

// Copies of the sub-configurations with the shared reward settings, worker
// count and derived seeds filled in.
Stage1Config resolve_stage1(const RunConfig& cfg);
RlConfig resolve_rl(const RunConfig& cfg);
CohortSpec resolve_cohort(const RunConfig& cfg);
CohortSpec resolve_ood_cohort(const RunConfig& cfg);
ExpertHyper resolve_expert(const RunConfig& cfg);

}  // namespace eagrl
