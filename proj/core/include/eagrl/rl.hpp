#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eagrl/distill.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/rewards.hpp"

namespace eagrl {

struct ClipConfig {
  double eps_low = 0.2;
  double eps_min = 0.2;
  double eps_max = 0.4;
};

void validate(const ClipConfig& cfg);

struct GroupTrajectory {
  std::vector<int> tokens;
  std::vector<double> logp_old;  // per token, under the sampling policy
  RewardBreakdown reward;
  std::vector<int> key_positions;
};

struct GroupBatch {
  int patient = -1;
  std::vector<GroupTrajectory> trajectories;
  std::vector<double> advantages;
  std::vector<double> entropies;   // mean key-token entropy per trajectory
  std::vector<double> clip_bounds; // upper clip bound per trajectory

  int size() const { return static_cast<int>(trajectories.size()); }
};

// G independent trajectories from `old` with their rewards. Advantages,
// entropies and bounds are left empty.
GroupBatch sample_group(const PolicyParameters& old, const ActionVocab& vocab, const PatientContext& patient, int g,
                        const RewardConfig& reward, Rng& rng);

// (R_i - mean) / population std; all zeros when the std is below 1e-12.
std::vector<double> group_advantage(std::span<const double> rewards);

// Mean entropy of the token distributions at the key positions.
double mean_key_entropy(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                        std::span<const int> tokens, std::span<const int> key_positions);

// Min-max maps entropies onto [eps_min, eps_max]; all eps_min when the spread
// is below 1e-12.
std::vector<double> adaptive_clip_bounds(std::span<const double> entropies, const ClipConfig& cfg);

double clip_fn(double r, double eps_low, double eps_up);

// Fills advantages, entropies and clip bounds. With adaptive clipping off
// every upper bound equals eps_low.
void prepare_batch(GroupBatch& batch, const PolicyParameters& old, const ActionVocab& vocab,
                   const RecordSummary& summary, const ClipConfig& clip, bool adaptive);

std::vector<std::vector<double>> importance_ratios(const PolicyParameters& params, const ActionVocab& vocab,
                                                   const RecordSummary& summary, const GroupBatch& batch);

struct Surrogate {
  double value = 0.0;
  std::vector<double> grad;  // empty unless requested
};

// J = (1/G) sum_i (1/|tau_i|) sum_t min(r Â_i, clip(r) Â_i). Tokens on the
// clipped branch contribute no gradient.
Surrogate surrogate_objective(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                              const GroupBatch& batch, double eps_low, bool with_grad);

struct RlConfig {
  int group_size = 8;
  int iterations = 100;
  int groups_per_iteration = 8;  // patients per pi_old snapshot
  int inner_epochs = 4;          // passes over the snapshot's groups, one ascent step per group each
  double lr = 0.1;
  ClipConfig clip;
  bool adaptive_clip = true;
  bool use_adam = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  RewardConfig reward;
  int eval_every = 0;  // 0 disables held-out evaluation
  int workers = 1;
  std::uint64_t seed = 2;
};

void validate(const RlConfig& cfg);

struct RlIterationLog {
  int iteration = 0;
  double mean_r = 0.0;
  double mean_r_cls = 0.0;
  double mean_r_att = 0.0;
  double mean_h = 0.0;
  double min_eps = 0.0;
  double max_eps = 0.0;
  std::optional<double> heldout_auroc;
};

struct Stage2Result {
  PolicyParameters params;
  std::vector<RlIterationLog> log;
};

using HeldoutEval = std::function<double(const PolicyParameters&)>;

Stage2Result run_stage2(const ActionVocab& vocab, std::span<const PatientContext> patients,
                        const PolicyParameters& init, const RlConfig& cfg, const HeldoutEval& heldout = {});

void write_rl_log_csv(const std::string& path, std::span<const RlIterationLog> log);

}  // namespace eagrl
