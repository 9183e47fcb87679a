#include "eagrl/eval.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "eagrl/error.hpp"
#include "eagrl/metrics.hpp"

namespace eagrl {
namespace {

struct Stratified {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
};

Stratified by_class(std::span<const int> labels) {
  Stratified s;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? s.pos : s.neg).push_back(i);
  return s;
}

void resample(const Stratified& s, Rng& rng, std::vector<std::size_t>& idx) {
  idx.clear();
  for (std::size_t i = 0; i < s.pos.size(); ++i) idx.push_back(s.pos[uniform_below(s.pos.size(), rng)]);
  for (std::size_t i = 0; i < s.neg.size(); ++i) idx.push_back(s.neg[uniform_below(s.neg.size(), rng)]);
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(v.size()));
}

void check_lengths(std::span<const int> labels, std::span<const double> scores, int n) {
  if (labels.size() != scores.size()) throw MetricError("bootstrap: labels and scores differ in length");
  if (n < 1) throw ArgumentError("bootstrap: n must be >= 1");
}

}  // namespace

BootstrapResult bootstrap_metric(std::span<const int> labels, std::span<const double> scores, const Metric& metric,
                                 int n, std::uint64_t seed) {
  check_lengths(labels, scores, n);
  const Stratified s = by_class(labels);
  Rng rng(seed);
  BootstrapResult out;
  std::vector<std::size_t> idx;
  std::vector<int> l;
  std::vector<double> sc;
  for (int b = 0; b < n; ++b) {
    resample(s, rng, idx);
    l.clear();
    sc.clear();
    for (std::size_t i : idx) {
      l.push_back(labels[i]);
      sc.push_back(scores[i]);
    }
    out.samples.push_back(metric(l, sc));
  }
  mean_std(out.samples, out.mean, out.std);
  return out;
}

MetricReport bootstrap_report(std::span<const int> labels, std::span<const double> scores, int n, std::uint64_t seed) {
  check_lengths(labels, scores, n);
  const Stratified s = by_class(labels);
  Rng rng(seed);
  MetricReport r;
  r.n_bootstrap = n;
  r.seed = seed;
  std::vector<std::size_t> idx;
  std::vector<int> l;
  std::vector<double> sc;
  for (int b = 0; b < n; ++b) {
    resample(s, rng, idx);
    l.clear();
    sc.clear();
    for (std::size_t i : idx) {
      l.push_back(labels[i]);
      sc.push_back(scores[i]);
    }
    r.auroc_samples.push_back(100.0 * auroc(l, sc));
    r.auprc_samples.push_back(100.0 * auprc(l, sc));
  }
  mean_std(r.auroc_samples, r.auroc_mean, r.auroc_std);
  mean_std(r.auprc_samples, r.auprc_mean, r.auprc_std);
  return r;
}

std::vector<int> cohort_labels(const Cohort& cohort) {
  std::vector<int> y;
  y.reserve(cohort.records.size());
  for (const auto& r : cohort.records) y.push_back(r.label);
  return y;
}

std::vector<double> policy_scores(const PolicyParameters& params, const ActionVocab& vocab, const Cohort& cohort,
                                  const FeatureStats& stats, ScoreMode mode) {
  std::vector<double> out;
  out.reserve(cohort.records.size());
  for (const auto& r : cohort.records) out.push_back(policy_score(params, vocab, summarize(vocab, r, stats), mode));
  return out;
}

std::vector<double> expert_scores(const ExpertModel& expert, const Cohort& cohort, const FeatureStats& stats) {
  std::vector<double> out;
  out.reserve(cohort.records.size());
  for (const auto& r : cohort.records) out.push_back(expert_predict(expert, r, stats));
  return out;
}

std::string metric_csv(std::span<const TableRow> rows) {
  std::ostringstream out;
  out.precision(10);
  out << "model,task,split,p_percent,auroc_mean,auroc_std,auprc_mean,auprc_std,n_boot,seed\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.task << ',' << r.split << ',' << r.p_percent << ',' << r.report.auroc_mean << ','
        << r.report.auroc_std << ',' << r.report.auprc_mean << ',' << r.report.auprc_std << ','
        << r.report.n_bootstrap << ',' << r.report.seed << '\n';
  return out.str();
}

void write_metric_csv(const std::string& path, std::span<const TableRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << metric_csv(rows);
}

RobustnessResult robustness_sweep(const PolicyParameters& policy, const ActionVocab& vocab,
                                  const ExpertModel& expert, const Cohort& test, const FeatureStats& stats,
                                  std::span<const double> p_grid, int n_bootstrap, std::uint64_t seed,
                                  ScoreMode mode) {
  const auto labels = cohort_labels(test);
  RobustnessResult out;
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    const double p = p_grid[i];
    const Cohort permuted = permute_features(test, p, derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.policy_scores.push_back(policy_scores(policy, vocab, permuted, stats, mode));
    out.expert_scores.push_back(expert_scores(expert, permuted, stats));
    out.rows.push_back({"policy", "outcome", "test", 100.0 * p,
                        bootstrap_report(labels, out.policy_scores.back(), n_bootstrap, seed)});
    out.rows.push_back({"expert", "outcome", "test", 100.0 * p,
                        bootstrap_report(labels, out.expert_scores.back(), n_bootstrap, seed)});
  }
  return out;
}

std::vector<TableRow> ood_eval(const PolicyParameters& policy, const ActionVocab& vocab, const ExpertModel& expert,
                               const Cohort& raw_b, int n_bootstrap, std::uint64_t seed, ScoreMode mode) {
  if (raw_b.features != vocab.features() || raw_b.features != expert.features)
    throw EvaluationError("ood_eval: cohort feature schema does not match the trained models");
  const FeatureStats stats_b = compute_feature_stats(raw_b);
  const Cohort b = locf_impute(raw_b, stats_b);
  const auto labels = cohort_labels(b);
  std::vector<TableRow> rows;
  rows.push_back({"policy", "outcome", "ood", 0.0,
                  bootstrap_report(labels, policy_scores(policy, vocab, b, stats_b, mode), n_bootstrap, seed)});
  rows.push_back({"expert", "outcome", "ood", 0.0,
                  bootstrap_report(labels, expert_scores(expert, b, stats_b), n_bootstrap, seed)});
  return rows;
}

std::vector<AblationRow> ablation_suite(const RunConfig& cfg, const PreparedData& data, const ExpertModel& expert,
                                        std::span<const Variant> variants) {
  const ActionVocab vocab = make_vocab(cfg, data.split.train.features);
  const auto train = build_contexts(vocab, data.split.train, expert, data.stats);
  const auto labels = cohort_labels(data.split.test);
  const std::uint64_t eval_seed = stage_seeds(cfg.seed).eval;
  std::vector<AblationRow> rows;
  // Variants that agree on Stage-1 share its result.
  std::map<std::pair<bool, bool>, TrainedPolicy> stage1;
  for (const auto& v : variants) {
    const std::pair<bool, bool> key{v.stage1, v.use_r_att || !v.stage1};
    auto it = stage1.find(key);
    if (it == stage1.end()) it = stage1.emplace(key, stage1_policy(cfg, vocab, train, v)).first;
    const TrainedPolicy t = stage2_policy(cfg, vocab, train, v, it->second);
    const auto scores = policy_scores(t.params, vocab, data.split.test, data.stats, cfg.eval.score_mode);
    AblationRow row;
    row.variant = v.name;
    row.report = bootstrap_report(labels, scores, cfg.eval.n_bootstrap, eval_seed);
    row.point_auroc = auroc(labels, scores);
    row.mean_r_att = std::numeric_limits<double>::quiet_NaN();
    if (!t.rl_log.empty()) {
      const std::size_t n = t.rl_log.size();
      const std::size_t tail = std::max<std::size_t>(1, n / 5);
      double sum = 0.0;
      for (std::size_t i = n - tail; i < n; ++i) sum += t.rl_log[i].mean_r_att;
      row.mean_r_att = sum / static_cast<double>(tail);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace eagrl
