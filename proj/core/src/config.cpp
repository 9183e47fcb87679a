#include "eagrl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eagrl/error.hpp"
#include "json.hpp"

namespace eagrl {
namespace {

using nlohmann::json;

// Walks one JSON object, assigning known keys and rejecting the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key " + path_ + "." + key);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ScoreMode parse_score_mode(const std::string& s) {
  if (s == "expected_bucket") return ScoreMode::kExpectedBucket;
  if (s == "greedy_bucket") return ScoreMode::kGreedyBucket;
  throw ConfigError("eval.score_mode must be expected_bucket or greedy_bucket");
}

const char* score_mode_name(ScoreMode m) {
  return m == ScoreMode::kExpectedBucket ? "expected_bucket" : "greedy_bucket";
}

}  // namespace

void validate(const RunConfig& c) {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* msg) {
    if (!ok) bad.emplace_back(msg);
  };
  const CohortSpec& s = c.cohort;
  auto sub = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      bad.emplace_back(e.what());
    }
  };
  sub([&] { validate(s); });
  check(c.eval.ood_distribution == "A" || c.eval.ood_distribution == "B", "eval.ood_distribution must be \"A\" or \"B\"");
  check(static_cast<int>(s.salient_set.size()) >= c.reward.k, "cohort.salient_set must have at least reward.k features");
  double sum = 0.0;
  bool positive = true;
  for (double r : c.split_ratios) {
    sum += r;
    positive = positive && r > 0.0;
  }
  check(positive && std::abs(sum - 1.0) < 1e-9, "split_ratios must be positive and sum to 1");
  check(c.expert.embed_dim >= 1, "expert.embed_dim must be >= 1");
  check(c.expert.epochs >= 0, "expert.epochs must be >= 0");
  check(c.expert.lr > 0.0, "expert.lr must be > 0");
  check(c.policy_hidden >= 1, "policy.hidden_dim must be >= 1");
  check(c.search.n_rollouts >= 1, "search.n_rollouts must be >= 1");
  check(c.search.max_depth >= 1, "search.max_depth must be >= 1");
  check(c.search.uct_weight >= 0.0, "search.uct_weight must be >= 0");
  check(c.search.branching >= 1, "search.branching must be >= 1");
  check(c.search.topk >= 1, "search.topk must be >= 1");
  check(c.reward.theta > 0.0 && c.reward.theta < 1.0, "reward.theta must lie in (0, 1)");
  check(c.reward.beta >= 0.0, "reward.beta must be >= 0");
  check(c.reward.lambda2 >= 0.0 && c.reward.lambda2 <= 1.0, "reward.lambda2 must lie in [0, 1]");
  check(c.reward.k >= 1 && c.reward.k <= s.n_features, "reward.k must lie in [1, cohort.n_features]");
  check(c.reward.k <= c.search.max_depth, "reward.k must not exceed search.max_depth");
  check(c.search.max_depth <= s.n_features, "search.max_depth must not exceed cohort.n_features");
  check(c.sft_lr > 0.0, "stage1.sft_lr must be > 0");
  check(c.sft_epochs >= 0, "stage1.sft_epochs must be >= 0");
  check(c.rl.group_size >= 2, "rl.group_size must be >= 2");
  check(c.rl.iterations >= 0, "rl.iterations must be >= 0");
  check(c.rl.groups_per_iteration >= 1, "rl.groups_per_iteration must be >= 1");
  check(c.rl.inner_epochs >= 1, "rl.inner_epochs must be >= 1");
  check(c.rl.lr > 0.0, "rl.lr must be > 0");
  check(c.rl.clip.eps_low > 0.0 && c.rl.clip.eps_low < 1.0, "rl.eps_low must lie in (0, 1)");
  check(c.rl.clip.eps_min >= 0.0, "rl.eps_min must be >= 0");
  check(c.rl.clip.eps_min <= c.rl.clip.eps_max, "rl.eps_min must not exceed rl.eps_max");
  check(c.rl.eval_every >= 0, "rl.eval_every must be >= 0");
  check(c.eval.n_bootstrap >= 1, "eval.n_bootstrap must be >= 1");
  bool grid_ok = !c.eval.p_grid.empty();
  for (double p : c.eval.p_grid) grid_ok = grid_ok && p >= 0.0 && p <= 1.0;
  check(grid_ok, "eval.p_grid must be a non-empty list of values in [0, 1]");
  check(c.eval.ood_patients >= 2, "eval.ood_patients must be >= 2");
  check(c.workers >= 1, "workers must be >= 1");
  if (bad.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ConfigError(msg);
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "config");
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.get("split_ratios", c.split_ratios);
  if (const json* x = root.child("cohort")) {
    Section s(*x, "cohort");
    s.get("n_patients", c.cohort.n_patients);
    s.get("n_features", c.cohort.n_features);
    s.get("salient_set", c.cohort.salient_set);
    s.get("missing_rate", c.cohort.missing_rate);
    s.get("label_noise", c.cohort.label_noise);
    s.get("distribution_id", c.cohort.distribution_id);
    s.get("prevalence", c.cohort.prevalence);
    s.get("min_visits", c.cohort.min_visits);
    s.get("max_visits", c.cohort.max_visits);
    s.finish();
  }
  if (const json* x = root.child("expert")) {
    Section s(*x, "expert");
    s.get("embed_dim", c.expert.embed_dim);
    s.get("epochs", c.expert.epochs);
    s.get("lr", c.expert.lr);
    s.get("init_scale", c.expert.init_scale);
    s.finish();
  }
  if (const json* x = root.child("policy")) {
    Section s(*x, "policy");
    s.get("hidden_dim", c.policy_hidden);
    s.finish();
  }
  if (const json* x = root.child("search")) {
    Section s(*x, "search");
    s.get("n_rollouts", c.search.n_rollouts);
    s.get("max_depth", c.search.max_depth);
    s.get("uct_weight", c.search.uct_weight);
    s.get("branching", c.search.branching);
    s.get("topk", c.search.topk);
    s.finish();
  }
  if (const json* x = root.child("reward")) {
    Section s(*x, "reward");
    s.get("theta", c.reward.theta);
    s.get("beta", c.reward.beta);
    s.get("lambda2", c.reward.lambda2);
    s.get("k", c.reward.k);
    s.finish();
  }
  if (const json* x = root.child("stage1")) {
    Section s(*x, "stage1");
    s.get("sft_lr", c.sft_lr);
    s.get("sft_epochs", c.sft_epochs);
    s.get("balance_classes", c.balance_classes);
    s.finish();
  }
  if (const json* x = root.child("rl")) {
    Section s(*x, "rl");
    s.get("group_size", c.rl.group_size);
    s.get("iterations", c.rl.iterations);
    s.get("groups_per_iteration", c.rl.groups_per_iteration);
    s.get("inner_epochs", c.rl.inner_epochs);
    s.get("lr", c.rl.lr);
    s.get("eps_low", c.rl.clip.eps_low);
    s.get("eps_min", c.rl.clip.eps_min);
    s.get("eps_max", c.rl.clip.eps_max);
    s.get("adaptive_clip", c.rl.adaptive_clip);
    std::string opt = c.rl.use_adam ? "adam" : "sgd";
    s.get("optimizer", opt);
    if (opt != "sgd" && opt != "adam") throw ConfigError("rl.optimizer must be sgd or adam");
    c.rl.use_adam = opt == "adam";
    s.get("eval_every", c.rl.eval_every);
    s.finish();
  }
  if (const json* x = root.child("eval")) {
    Section s(*x, "eval");
    s.get("n_bootstrap", c.eval.n_bootstrap);
    s.get("p_grid", c.eval.p_grid);
    std::string mode = score_mode_name(c.eval.score_mode);
    s.get("score_mode", mode);
    c.eval.score_mode = parse_score_mode(mode);
    s.get("ood_distribution", c.eval.ood_distribution);
    s.get("ood_patients", c.eval.ood_patients);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["split_ratios"] = c.split_ratios;
  j["cohort"] = {{"n_patients", c.cohort.n_patients},   {"n_features", c.cohort.n_features},
                 {"salient_set", c.cohort.salient_set}, {"missing_rate", c.cohort.missing_rate},
                 {"label_noise", c.cohort.label_noise}, {"distribution_id", c.cohort.distribution_id},
                 {"prevalence", c.cohort.prevalence},   {"min_visits", c.cohort.min_visits},
                 {"max_visits", c.cohort.max_visits}};
  j["expert"] = {{"embed_dim", c.expert.embed_dim},
                 {"epochs", c.expert.epochs},
                 {"lr", c.expert.lr},
                 {"init_scale", c.expert.init_scale}};
  j["policy"] = {{"hidden_dim", c.policy_hidden}};
  j["search"] = {{"n_rollouts", c.search.n_rollouts},
                 {"max_depth", c.search.max_depth},
                 {"uct_weight", c.search.uct_weight},
                 {"branching", c.search.branching},
                 {"topk", c.search.topk}};
  j["reward"] = {{"theta", c.reward.theta}, {"beta", c.reward.beta}, {"lambda2", c.reward.lambda2}, {"k", c.reward.k}};
  j["stage1"] = {{"sft_lr", c.sft_lr}, {"sft_epochs", c.sft_epochs}, {"balance_classes", c.balance_classes}};
  j["rl"] = {{"group_size", c.rl.group_size},
             {"iterations", c.rl.iterations},
             {"groups_per_iteration", c.rl.groups_per_iteration},
             {"inner_epochs", c.rl.inner_epochs},
             {"lr", c.rl.lr},
             {"eps_low", c.rl.clip.eps_low},
             {"eps_min", c.rl.clip.eps_min},
             {"eps_max", c.rl.clip.eps_max},
             {"adaptive_clip", c.rl.adaptive_clip},
             {"optimizer", c.rl.use_adam ? "adam" : "sgd"},
             {"eval_every", c.rl.eval_every}};
  j["eval"] = {{"n_bootstrap", c.eval.n_bootstrap},
               {"p_grid", c.eval.p_grid},
               {"score_mode", score_mode_name(c.eval.score_mode)},
               {"ood_distribution", c.eval.ood_distribution},
               {"ood_patients", c.eval.ood_patients}};
  return j.dump(2);
}

StageSeeds stage_seeds(std::uint64_t root) {
  StageSeeds s;
  s.cohort = derive_seed(root, "cohort");
  s.split = root;  // the split is seeded with the root seed itself
  s.expert = derive_seed(root, "expert");
  s.policy_init = derive_seed(root, "policy");
  s.stage1 = derive_seed(root, "stage1");
  s.stage2 = derive_seed(root, "stage2");
  s.ood = derive_seed(root, "ood");
  s.eval = derive_seed(root, "eval");
  return s;
}

Stage1Config resolve_stage1(const RunConfig& c) {
  Stage1Config s;
  s.search = c.search;
  s.search.reward = c.reward;
  s.sft_lr = c.sft_lr;
  s.sft_epochs = c.sft_epochs;
  s.balance_classes = c.balance_classes;
  s.workers = c.workers;
  s.seed = stage_seeds(c.seed).stage1;
  return s;
}

RlConfig resolve_rl(const RunConfig& c) {
  RlConfig r = c.rl;
  r.reward = c.reward;
  r.workers = c.workers;
  r.seed = stage_seeds(c.seed).stage2;
  return r;
}

CohortSpec resolve_cohort(const RunConfig& c) {
  CohortSpec s = c.cohort;
  s.seed = stage_seeds(c.seed).cohort;
  return s;
}

CohortSpec resolve_ood_cohort(const RunConfig& c) {
  CohortSpec s = c.cohort;
  s.distribution_id = c.eval.ood_distribution;
  s.n_patients = c.eval.ood_patients;
  s.seed = stage_seeds(c.seed).ood;
  return s;
}

ExpertHyper resolve_expert(const RunConfig& c) {
  ExpertHyper h = c.expert;
  h.seed = stage_seeds(c.seed).expert;
  return h;
}

}  // namespace eagrl
