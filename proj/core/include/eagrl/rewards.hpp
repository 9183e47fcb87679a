#pragma once

#include <span>

namespace eagrl {

struct RewardConfig {
  double theta = 0.5;    // decision threshold
  double beta = 1.0;     // margin bonus weight
  double lambda2 = 0.6;  // weight of the classification term in the mixture
  int k = 5;             // declared-feature count
};

void validate(const RewardConfig& cfg);

struct RewardBreakdown {
  double r_cls = 0.0;
  double r_att = 0.0;
  double total = 0.0;
  double margin_bonus = 0.0;
};

struct ClassificationReward {
  double r_cls;
  double margin_bonus;
};

// log-likelihood of the true outcome plus a bonus proportional to how far the
// prediction sits past the threshold on the correct side. y_hat must lie
// strictly inside (0, 1).
ClassificationReward classification_reward(double y_hat, int y_star, const RewardConfig& cfg);

// Jaccard similarity of two feature-index sets (duplicates ignored). Throws
// SimilarityError when both are empty.
double attention_alignment_reward(std::span<const int> declared, std::span<const int> expert);

double total_reward(double r_cls, double r_att, const RewardConfig& cfg);

RewardBreakdown score_prediction(double y_hat, std::span<const int> declared, int y_star,
                                 std::span<const int> expert_features, const RewardConfig& cfg);

}  // namespace eagrl
