#pragma once

#include <string>
#include <vector>

#include "eagrl/config.hpp"

namespace eagrl {

// Stage names in dependency order.
const std::vector<std::string>& pipeline_stages();

// Comma-separated stage list, or "all" for every stage except "ablate".
// Throws ArgumentError on an unknown name. Result is in dependency order.
std::vector<std::string> parse_stages(const std::string& csv);

// runs/<UTC timestamp> under `base`.
std::string timestamped_run_dir(const std::string& base);

// Artifact file names inside a run directory.
namespace artifacts {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kCohort = "cohort.jsonl";
inline constexpr const char* kTrain = "train.jsonl";
inline constexpr const char* kVal = "val.jsonl";
inline constexpr const char* kTest = "test.jsonl";
inline constexpr const char* kDataReport = "data_report.json";
inline constexpr const char* kExpert = "expert.json";
inline constexpr const char* kExpertReport = "expert_report.json";
inline constexpr const char* kPolicyStage1 = "policy_stage1.json";
inline constexpr const char* kDsft = "dsft.jsonl";
inline constexpr const char* kDistillReport = "distill_report.json";
inline constexpr const char* kPolicy = "policy.json";
inline constexpr const char* kRlLog = "rl_log.csv";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kRobustness = "robustness.csv";
inline constexpr const char* kOodCohort = "cohort_ood.jsonl";
inline constexpr const char* kOod = "ood.csv";
inline constexpr const char* kAblation = "ablation.csv";
}  // namespace artifacts

// Individual stages on explicit paths. Each refuses to overwrite an existing
// output (StageError) and reports missing inputs as DependencyError.
void stage_gen_data(const RunConfig& cfg, const std::string& out_dir);
void stage_train_expert(const RunConfig& cfg, const std::string& train_path, const std::string& val_path,
                        const std::string& expert_out, const std::string& report_out);
void stage_distill(const RunConfig& cfg, const std::string& cohort_path, const std::string& expert_path,
                   const std::string& policy_out, const std::string& dsft_out, const std::string& report_out);
void stage_rl(const RunConfig& cfg, const std::string& cohort_path, const std::string& expert_path,
              const std::string& policy_in, const std::string& policy_out, const std::string& log_out);
void stage_eval(const RunConfig& cfg, const std::string& test_path, const std::string& expert_path,
                const std::string& policy_path, const std::string& out_csv);
void stage_robustness(const RunConfig& cfg, const std::string& test_path, const std::string& expert_path,
                      const std::string& policy_path, const std::string& out_csv);
void stage_ood(const RunConfig& cfg, const std::string& expert_path, const std::string& policy_path,
               const std::string& cohort_out, const std::string& out_csv);
void stage_ablate(const RunConfig& cfg, const std::string& train_path, const std::string& val_path,
                  const std::string& test_path, const std::string& expert_path, const std::string& out_csv);

struct PipelineResult {
  std::string run_dir;
  std::vector<std::string> completed;
};

// Runs the requested stages in dependency order inside `run_dir` (created if
// needed). The resolved config is persisted on first use; a later invocation
// on the same directory must resolve to the same config.
PipelineResult run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages, const std::string& run_dir);

}  // namespace eagrl
