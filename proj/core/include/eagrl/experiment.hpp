#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eagrl/config.hpp"
#include "eagrl/distill.hpp"
#include "eagrl/expert.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/rl.hpp"

namespace eagrl {

// Generated cohort, its imputed stratified split and the train-split feature
// statistics every downstream stage standardizes against.
struct PreparedData {
  Cohort raw;
  CohortSplit split;
  FeatureStats stats;
};

PreparedData prepare_data(const RunConfig& cfg);

// Raw training statistics, then LOCF on all three splits.
PreparedData prepare_split(const Cohort& raw, const RunConfig& cfg);

ActionVocab make_vocab(const RunConfig& cfg, const std::vector<std::string>& features);

ExpertTrainResult fit_expert(const RunConfig& cfg, const PreparedData& data);

/// Training recipe: which stages run and which method components are on.
struct Variant {
  std::string name = "full";
  bool stage1 = true;
  bool stage2 = true;
  bool use_r_att = true;       // off: lambda2 = 1 in both stages
  bool adaptive_clip = true;   // off: symmetric clip at eps_low
};

// The full method followed by the four single-component removals.
std::vector<Variant> ablation_variants();

struct TrainedPolicy {
  PolicyParameters params;
  std::optional<DistillReport> stage1;
  std::vector<TrajectoryRecord> dsft;
  std::vector<RlIterationLog> rl_log;
};

PolicyParameters untrained_policy(const RunConfig& cfg, const ActionVocab& vocab);

// The variant's starting point for Stage-2: the untrained policy, or the
// Stage-1 result when the variant runs Stage-1.
TrainedPolicy stage1_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                            const Variant& variant);
// Runs Stage-2 on top of `from` when the variant asks for it.
TrainedPolicy stage2_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                            const Variant& variant, TrainedPolicy from, const HeldoutEval& heldout = {});
TrainedPolicy train_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                           const Variant& variant, const HeldoutEval& heldout = {});

}  // namespace eagrl
