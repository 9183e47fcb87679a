#include "eagrl/experiment.hpp"

namespace eagrl {

PreparedData prepare_split(const Cohort& raw, const RunConfig& cfg) {
  PreparedData d;
  d.raw = raw;
  CohortSplit split = stratified_split(raw, cfg.split_ratios, stage_seeds(cfg.seed).split);
  d.stats = compute_feature_stats(split.train);
  d.split.train = locf_impute(split.train, d.stats);
  d.split.val = locf_impute(split.val, d.stats);
  d.split.test = locf_impute(split.test, d.stats);
  return d;
}

PreparedData prepare_data(const RunConfig& cfg) {
  validate(cfg);
  return prepare_split(generate_cohort(resolve_cohort(cfg)), cfg);
}

ActionVocab make_vocab(const RunConfig& cfg, const std::vector<std::string>& features) {
  return ActionVocab(features, cfg.reward.k, cfg.search.max_depth);
}

ExpertTrainResult fit_expert(const RunConfig& cfg, const PreparedData& data) {
  return train_expert(data.split.train, data.split.val, data.stats, resolve_expert(cfg));
}

std::vector<Variant> ablation_variants() {
  std::vector<Variant> v(5);
  v[1].name = "w/o Stage-1";
  v[1].stage1 = false;
  v[2].name = "w/o Stage-2";
  v[2].stage2 = false;
  v[3].name = "w/o R_att";
  v[3].use_r_att = false;
  v[4].name = "w/o eps(tau)";
  v[4].adaptive_clip = false;
  return v;
}

PolicyParameters untrained_policy(const RunConfig& cfg, const ActionVocab& vocab) {
  return init_policy(vocab, cfg.policy_hidden, stage_seeds(cfg.seed).policy_init);
}

TrainedPolicy stage1_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                            const Variant& variant) {
  TrainedPolicy out;
  out.params = untrained_policy(cfg, vocab);
  if (!variant.stage1) return out;
  Stage1Config s1 = resolve_stage1(cfg);
  if (!variant.use_r_att) s1.search.reward.lambda2 = 1.0;
  Stage1Result r = run_stage1(vocab, train, out.params, s1);
  out.params = std::move(r.params);
  out.stage1 = std::move(r.report);
  out.dsft = std::move(r.dsft);
  return out;
}

TrainedPolicy stage2_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                            const Variant& variant, TrainedPolicy from, const HeldoutEval& heldout) {
  if (!variant.stage2) return from;
  RlConfig rl = resolve_rl(cfg);
  if (!variant.use_r_att) rl.reward.lambda2 = 1.0;
  rl.adaptive_clip = variant.adaptive_clip;
  Stage2Result r = run_stage2(vocab, train, from.params, rl, heldout);
  from.params = std::move(r.params);
  from.rl_log = std::move(r.log);
  return from;
}

TrainedPolicy train_policy(const RunConfig& cfg, const ActionVocab& vocab, std::span<const PatientContext> train,
                           const Variant& variant, const HeldoutEval& heldout) {
  return stage2_policy(cfg, vocab, train, variant, stage1_policy(cfg, vocab, train, variant), heldout);
}

}  // namespace eagrl
