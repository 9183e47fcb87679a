#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eagrl/synth_ehr.hpp"

namespace eagrl {

struct ExpertHyper {
  int embed_dim = 4;
  int epochs = 400;
  double lr = 0.5;
  double init_scale = 0.3;
  std::uint64_t seed = 11;
};

/// Feature-attention binary classifier.
///
/// Each serialization position p owns a linear embedding e_p = W_p u_p + b_p of
/// (last-value z-score, first-to-last change in sd units, observed fraction).
/// Scores s_p = q . tanh(e_p) + c_p are softmax-normalized into attention
/// weights, the embeddings are pooled by those weights, and a logistic head
/// reads the pooled vector. Weights are bound to positions, so the model reads
/// records in their serialization order.
struct ExpertModel {
  int n_features = 0;
  int embed_dim = 0;
  std::vector<double> values;
  FeatureStats stats;
  std::vector<std::string> features;
  bool trained = false;

  // Parameter offsets.
  std::size_t embed_w(int pos) const { return static_cast<std::size_t>(pos) * embed_dim * 4; }
  std::size_t embed_b(int pos) const { return embed_w(pos) + static_cast<std::size_t>(embed_dim) * 3; }
  std::size_t query() const { return static_cast<std::size_t>(n_features) * embed_dim * 4; }
  std::size_t position_bias() const { return query() + embed_dim; }
  std::size_t head_w() const { return position_bias() + n_features; }
  std::size_t head_b() const { return head_w() + embed_dim; }
  std::size_t size() const { return head_b() + 1; }
};

ExpertModel init_expert(const std::vector<std::string>& features, const FeatureStats& stats, const ExpertHyper& hyper);

// Attention weights per serialization position; nonnegative, sum to 1.
std::vector<double> expert_attention(const ExpertModel& model, const PatientRecord& record);

// Probability in (0, 1). The overload with explicit stats standardizes inputs
// against them instead of the model's reference statistics.
double expert_predict(const ExpertModel& model, const PatientRecord& record);
double expert_predict(const ExpertModel& model, const PatientRecord& record, const FeatureStats& stats);

struct SalienceReport {
  double probability = 0.5;
  std::vector<int> ranked_features;  // canonical indices, attention descending
  std::vector<int> top_k;
};

// Top-K features by attention weight; ties go to the lower canonical index.
SalienceReport expert_salient(const ExpertModel& model, const PatientRecord& record, int k);
SalienceReport salience_from_weights(const PatientRecord& record, const std::vector<double>& position_weights,
                                     double probability, int k);

struct ExpertTrainResult {
  ExpertModel model;
  std::vector<double> val_auroc;  // per epoch, index 0 = initialization
  int best_epoch = 0;
};

// Full-batch gradient descent on mean binary cross-entropy; keeps the
// parameters with the best validation AUROC (earliest on ties). Cohorts must be
// imputed.
ExpertTrainResult train_expert(const Cohort& train, const Cohort& val, const FeatureStats& stats,
                               const ExpertHyper& hyper);

// Mean cross-entropy and its gradient over a cohort (exposed for gradient
// checks).
double expert_loss(const ExpertModel& model, const Cohort& cohort, std::vector<double>* grad);

void save_expert(const std::string& path, const ExpertModel& model);
ExpertModel load_expert(const std::string& path);

}  // namespace eagrl
