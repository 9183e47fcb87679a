#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eagrl/expert.hpp"
#include "eagrl/experiment.hpp"
#include "eagrl/policy.hpp"

namespace eagrl {

using Metric = std::function<double(std::span<const int>, std::span<const double>)>;

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> samples;
};

// Stratified resampling: each class is resampled with replacement at its own
// size, so both classes are always present.
BootstrapResult bootstrap_metric(std::span<const int> labels, std::span<const double> scores, const Metric& metric,
                                 int n, std::uint64_t seed);

/// AUROC and AUPRC in percent, mean and population std over resamples.
struct MetricReport {
  double auroc_mean = 0.0;
  double auroc_std = 0.0;
  double auprc_mean = 0.0;
  double auprc_std = 0.0;
  int n_bootstrap = 0;
  std::uint64_t seed = 0;
  std::vector<double> auroc_samples;
  std::vector<double> auprc_samples;
};

// AUROC and AUPRC share the resample indices.
MetricReport bootstrap_report(std::span<const int> labels, std::span<const double> scores, int n, std::uint64_t seed);

std::vector<int> cohort_labels(const Cohort& cohort);
std::vector<double> policy_scores(const PolicyParameters& params, const ActionVocab& vocab, const Cohort& cohort,
                                  const FeatureStats& stats, ScoreMode mode);
std::vector<double> expert_scores(const ExpertModel& expert, const Cohort& cohort, const FeatureStats& stats);

struct TableRow {
  std::string model;
  std::string task = "outcome";
  std::string split;
  double p_percent = 0.0;
  MetricReport report;
};

void write_metric_csv(const std::string& path, std::span<const TableRow> rows);
std::string metric_csv(std::span<const TableRow> rows);

// Per p: shuffles the serialization order of a fraction p of the features in
// every test record, then scores both models on the permuted records.
struct RobustnessResult {
  std::vector<TableRow> rows;
  std::vector<std::vector<double>> policy_scores;  // per p
  std::vector<std::vector<double>> expert_scores;  // per p
};

RobustnessResult robustness_sweep(const PolicyParameters& policy, const ActionVocab& vocab,
                                  const ExpertModel& expert, const Cohort& test, const FeatureStats& stats,
                                  std::span<const double> p_grid, int n_bootstrap, std::uint64_t seed,
                                  ScoreMode mode);

// Both models on a cohort from another distribution. The cohort is imputed
// and standardized with its own statistics. Throws EvaluationError when its
// feature schema differs from the models'.
std::vector<TableRow> ood_eval(const PolicyParameters& policy, const ActionVocab& vocab, const ExpertModel& expert,
                               const Cohort& raw_b, int n_bootstrap, std::uint64_t seed, ScoreMode mode);

struct AblationRow {
  std::string variant;
  MetricReport report;
  double point_auroc = 0.0;
  double mean_r_att = 0.0;  // over the final RL iterations, NaN without Stage-2
};

// Trains each variant with identical data, expert and seeds and evaluates it
// on the test split.
std::vector<AblationRow> ablation_suite(const RunConfig& cfg, const PreparedData& data, const ExpertModel& expert,
                                        std::span<const Variant> variants);

}  // namespace eagrl
