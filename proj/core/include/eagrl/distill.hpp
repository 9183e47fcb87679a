#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eagrl/expert.hpp"
#include "eagrl/mcts.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/reasoning_env.hpp"

namespace eagrl {

// Per-patient inputs shared by both training stages.
struct PatientContext {
  std::string patient_id;
  int label = 0;
  RecordSummary summary;
  std::vector<int> expert_features;  // C_exp, the expert's top-K set
};

std::vector<PatientContext> build_contexts(const ActionVocab& vocab, const Cohort& cohort, const ExpertModel& expert,
                                           const FeatureStats& stats);

struct Stage1Config {
  SearchConfig search;
  double sft_lr = 0.5;
  int sft_epochs = 30;
  // Duplicate minority-class trajectories until both classes contribute
  // equally to D_SFT.
  bool balance_classes = false;
  int workers = 1;
  std::uint64_t seed = 1;
};

void validate(const Stage1Config& cfg, const ActionVocab& vocab);

struct DistillReport {
  int n_patients = 0;
  int n_trajectories = 0;
  double mean_total_reward = 0.0;
  double mean_r_att = 0.0;
  std::vector<double> sft_loss_history;
  std::string checkpoint_ref;
};

struct Stage1Result {
  PolicyParameters params;
  DistillReport report;
  std::vector<TrajectoryRecord> dsft;
  std::vector<std::vector<TerminalTrajectory>> terminals;  // per patient, as found by the search
};

// Expert-guided search per patient, per-patient top-k into D_SFT, then
// maximum-likelihood fitting on D_SFT. Throws StageError when no trajectory
// was collected.
Stage1Result run_stage1(const ActionVocab& vocab, std::span<const PatientContext> patients,
                        const PolicyParameters& init, const Stage1Config& cfg);

// Recomputes the reward statistics of a report from D_SFT entries.
DistillReport summarize_dsft(std::span<const TrajectoryRecord> dsft, int n_patients);

std::string report_to_json(const DistillReport& report);

}  // namespace eagrl
