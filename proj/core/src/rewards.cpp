#include "eagrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eagrl/error.hpp"

namespace eagrl {

void validate(const RewardConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) throw ConfigError("reward.theta must lie in (0, 1)");
  if (!(cfg.beta >= 0.0)) throw ConfigError("reward.beta must be >= 0");
  if (!(cfg.lambda2 >= 0.0 && cfg.lambda2 <= 1.0)) throw ConfigError("reward.lambda2 must lie in [0, 1]");
  if (cfg.k < 1) throw ConfigError("reward.k must be >= 1");
}

ClassificationReward classification_reward(double y_hat, int y_star, const RewardConfig& cfg) {
  if (!(y_hat > 0.0 && y_hat < 1.0)) throw DomainError("classification_reward: prediction must lie in (0, 1)");
  if (y_star != 0 && y_star != 1) throw DomainError("classification_reward: label must be 0 or 1");
  double bonus = 0.0;
  if (y_star == 1 && y_hat > cfg.theta)
    bonus = cfg.beta * (y_hat - cfg.theta);
  else if (y_star == 0 && y_hat < cfg.theta)
    bonus = cfg.beta * (cfg.theta - y_hat);
  const double likelihood = y_star == 1 ? y_hat : 1.0 - y_hat;
  return {std::log(likelihood) + bonus, bonus};
}

double attention_alignment_reward(std::span<const int> declared, std::span<const int> expert) {
  std::vector<int> a(declared.begin(), declared.end());
  std::vector<int> b(expert.begin(), expert.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) throw SimilarityError("attention_alignment_reward: both feature sets are empty");
  std::vector<int> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

double total_reward(double r_cls, double r_att, const RewardConfig& cfg) {
  return cfg.lambda2 * r_cls + (1.0 - cfg.lambda2) * r_att;
}

RewardBreakdown score_prediction(double y_hat, std::span<const int> declared, int y_star,
                                 std::span<const int> expert_features, const RewardConfig& cfg) {
  const auto cls = classification_reward(y_hat, y_star, cfg);
  RewardBreakdown out;
  out.r_cls = cls.r_cls;
  out.margin_bonus = cls.margin_bonus;
  out.r_att = attention_alignment_reward(declared, expert_features);
  out.total = total_reward(out.r_cls, out.r_att, cfg);
  return out;
}

}  // namespace eagrl
