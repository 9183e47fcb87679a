#include "eagrl/distill.hpp"

#include "eagrl/error.hpp"
#include "eagrl/parallel.hpp"
#include "json.hpp"

namespace eagrl {

std::vector<PatientContext> build_contexts(const ActionVocab& vocab, const Cohort& cohort, const ExpertModel& expert,
                                           const FeatureStats& stats) {
  std::vector<PatientContext> out;
  out.reserve(cohort.records.size());
  for (const auto& rec : cohort.records) {
    PatientContext ctx;
    ctx.patient_id = rec.patient_id;
    ctx.label = rec.label;
    ctx.summary = summarize(vocab, rec, stats);
    ctx.expert_features = expert_salient(expert, rec, vocab.k()).top_k;
    out.push_back(std::move(ctx));
  }
  return out;
}

void validate(const Stage1Config& cfg, const ActionVocab& vocab) {
  validate(cfg.search);
  if (cfg.search.max_depth != vocab.max_asks())
    throw ConfigError("search.max_depth must equal the vocabulary's maximum number of subquestions");
  if (cfg.search.reward.k != vocab.k()) throw ConfigError("reward.k must equal the vocabulary's K");
  if (!(cfg.sft_lr > 0.0)) throw ConfigError("stage1.sft_lr must be > 0");
  if (cfg.sft_epochs < 0) throw ConfigError("stage1.sft_epochs must be >= 0");
}

DistillReport summarize_dsft(std::span<const TrajectoryRecord> dsft, int n_patients) {
  DistillReport r;
  r.n_patients = n_patients;
  r.n_trajectories = static_cast<int>(dsft.size());
  for (const auto& t : dsft) {
    r.mean_total_reward += t.reward.total;
    r.mean_r_att += t.reward.r_att;
  }
  if (!dsft.empty()) {
    r.mean_total_reward /= static_cast<double>(dsft.size());
    r.mean_r_att /= static_cast<double>(dsft.size());
  }
  return r;
}

Stage1Result run_stage1(const ActionVocab& vocab, std::span<const PatientContext> patients,
                        const PolicyParameters& init, const Stage1Config& cfg) {
  validate(cfg, vocab);
  Stage1Result result;
  result.terminals.resize(patients.size());
  std::vector<std::vector<TerminalTrajectory>> chosen(patients.size());

  parallel_for(patients.size(), cfg.workers, [&](std::size_t i) {
    const PatientContext& p = patients[i];
    PatientSearchDomain domain(init, vocab, p.summary, p.expert_features, p.label, cfg.search.reward);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    SearchResult search = run_search(domain, cfg.search, rng);
    chosen[i] = extract_topk(search.terminals, cfg.search.topk);
    result.terminals[i] = std::move(search.terminals);
  });

  std::vector<int> owner;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    for (auto& t : chosen[i]) {
      result.dsft.push_back({patients[i].patient_id, patients[i].label, std::move(t.tokens), t.reward});
      owner.push_back(static_cast<int>(i));
    }
  }
  if (result.dsft.empty()) throw StageError("stage 1: search produced no trajectories");

  if (cfg.balance_classes) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t j = 0; j < result.dsft.size(); ++j) by_class[result.dsft[j].label].push_back(j);
    const int minority = by_class[0].size() < by_class[1].size() ? 0 : 1;
    const auto& small = by_class[minority];
    const auto& large = by_class[1 - minority];
    for (std::size_t j = 0; !small.empty() && small.size() + j < large.size(); ++j) {
      const std::size_t src = small[j % small.size()];
      result.dsft.push_back(result.dsft[src]);
      owner.push_back(owner[src]);
    }
  }

  std::vector<SftExample> data;
  data.reserve(result.dsft.size());
  for (std::size_t j = 0; j < result.dsft.size(); ++j)
    data.push_back({&patients[owner[j]].summary, result.dsft[j].token_ids});
  SftResult fit = sft_fit(init, vocab, data, cfg.sft_lr, cfg.sft_epochs, cfg.workers);

  result.params = std::move(fit.params);
  result.report = summarize_dsft(result.dsft, static_cast<int>(patients.size()));
  result.report.sft_loss_history = std::move(fit.loss_history);
  return result;
}

std::string report_to_json(const DistillReport& report) {
  nlohmann::ordered_json j;
  j["n_patients"] = report.n_patients;
  j["n_trajectories"] = report.n_trajectories;
  j["mean_total_reward"] = report.mean_total_reward;
  j["mean_r_att"] = report.mean_r_att;
  j["sft_loss_history"] = report.sft_loss_history;
  j["checkpoint_ref"] = report.checkpoint_ref;
  return j.dump(2);
}

}  // namespace eagrl
