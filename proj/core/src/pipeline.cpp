#include "eagrl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eagrl/error.hpp"
#include "eagrl/eval.hpp"
#include "eagrl/experiment.hpp"
#include "eagrl/metrics.hpp"
#include "json.hpp"

namespace eagrl {
namespace {

namespace fs = std::filesystem;

void ensure_absent(const std::string& path) {
  if (fs::exists(path)) throw StageError(path + " already exists; stage outputs are write-once");
}

void require(const std::string& path, const std::string& stage) {
  if (!fs::exists(path)) throw DependencyError("missing " + path + "; run stage '" + stage + "' first");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

Cohort load_imputed(const std::string& path, const FeatureStats& stats, const std::string& stage) {
  require(path, stage);
  return locf_impute(read_cohort_jsonl(path), stats);
}

ExpertModel load_expert_dep(const std::string& path) {
  require(path, "expert");
  return load_expert(path);
}

PolicyParameters load_policy_dep(const std::string& path, const ActionVocab& vocab, const std::string& stage) {
  require(path, stage);
  return load_policy(path, vocab);
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"data", "expert", "distill", "rl",
                                                  "eval", "robustness", "ood", "ablate"};
  return stages;
}

std::vector<std::string> parse_stages(const std::string& csv) {
  const auto& all = pipeline_stages();
  if (csv == "all") return {all.begin(), all.end() - 1};
  std::vector<bool> wanted(all.size(), false);
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto it = std::find(all.begin(), all.end(), item);
    if (it == all.end()) throw ArgumentError("unknown stage '" + item + "'");
    wanted[it - all.begin()] = true;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (wanted[i]) out.push_back(all[i]);
  if (out.empty()) throw ArgumentError("no stages requested");
  return out;
}

std::string timestamped_run_dir(const std::string& base) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return (fs::path(base) / "runs" / buf).string();
}

void stage_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  const std::string paths[] = {join(out_dir, artifacts::kCohort), join(out_dir, artifacts::kTrain),
                               join(out_dir, artifacts::kVal), join(out_dir, artifacts::kTest),
                               join(out_dir, artifacts::kDataReport)};
  for (const auto& p : paths) ensure_absent(p);
  fs::create_directories(out_dir);
  const Cohort raw = generate_cohort(resolve_cohort(cfg));
  const CohortSplit split = stratified_split(raw, cfg.split_ratios, stage_seeds(cfg.seed).split);
  write_cohort_jsonl(paths[0], raw);
  write_cohort_jsonl(paths[1], split.train);
  write_cohort_jsonl(paths[2], split.val);
  write_cohort_jsonl(paths[3], split.test);
  nlohmann::ordered_json j;
  j["n_patients"] = raw.records.size();
  j["features"] = raw.features;
  for (const auto& [name, c] : {std::pair<const char*, const Cohort*>{"train", &split.train},
                                {"val", &split.val},
                                {"test", &split.test}})
    j["splits"][name] = {{"n", c->records.size()}, {"positives", c->positives()}};
  write_text(paths[4], j.dump(2));
}

void stage_train_expert(const RunConfig& cfg, const std::string& train_path, const std::string& val_path,
                        const std::string& expert_out, const std::string& report_out) {
  ensure_absent(expert_out);
  ensure_absent(report_out);
  require(train_path, "data");
  require(val_path, "data");
  const Cohort train_raw = read_cohort_jsonl(train_path);
  const FeatureStats stats = compute_feature_stats(train_raw);
  const Cohort train = locf_impute(train_raw, stats);
  const Cohort val = locf_impute(read_cohort_jsonl(val_path), stats);
  const ExpertTrainResult r = train_expert(train, val, stats, resolve_expert(cfg));
  save_expert(expert_out, r.model);
  nlohmann::ordered_json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val_auroc"] = r.val_auroc[r.best_epoch];
  j["val_auroc"] = r.val_auroc;
  write_text(report_out, j.dump(2));
}

void stage_distill(const RunConfig& cfg, const std::string& cohort_path, const std::string& expert_path,
                   const std::string& policy_out, const std::string& dsft_out, const std::string& report_out) {
  ensure_absent(policy_out);
  ensure_absent(dsft_out);
  ensure_absent(report_out);
  const ExpertModel expert = load_expert_dep(expert_path);
  const Cohort train = load_imputed(cohort_path, expert.stats, "data");
  const ActionVocab vocab = make_vocab(cfg, train.features);
  const auto contexts = build_contexts(vocab, train, expert, expert.stats);
  Stage1Result r = run_stage1(vocab, contexts, untrained_policy(cfg, vocab), resolve_stage1(cfg));
  save_policy(policy_out, r.params);
  std::vector<const RecordSummary*> summaries;
  for (const auto& t : r.dsft) {
    const auto it = std::find_if(contexts.begin(), contexts.end(),
                                 [&](const PatientContext& c) { return c.patient_id == t.patient_id; });
    summaries.push_back(&it->summary);
  }
  write_trajectories_jsonl(dsft_out, vocab, summaries, r.dsft);
  r.report.checkpoint_ref = fs::path(policy_out).filename().string();
  write_text(report_out, report_to_json(r.report));
}

void stage_rl(const RunConfig& cfg, const std::string& cohort_path, const std::string& expert_path,
              const std::string& policy_in, const std::string& policy_out, const std::string& log_out) {
  ensure_absent(policy_out);
  ensure_absent(log_out);
  const ExpertModel expert = load_expert_dep(expert_path);
  const Cohort train = load_imputed(cohort_path, expert.stats, "data");
  const ActionVocab vocab = make_vocab(cfg, train.features);
  const PolicyParameters init = load_policy_dep(policy_in, vocab, "distill");
  const auto contexts = build_contexts(vocab, train, expert, expert.stats);
  const Stage2Result r = run_stage2(vocab, contexts, init, resolve_rl(cfg));
  save_policy(policy_out, r.params);
  write_rl_log_csv(log_out, r.log);
}

void stage_eval(const RunConfig& cfg, const std::string& test_path, const std::string& expert_path,
                const std::string& policy_path, const std::string& out_csv) {
  ensure_absent(out_csv);
  const ExpertModel expert = load_expert_dep(expert_path);
  const Cohort test = load_imputed(test_path, expert.stats, "data");
  const ActionVocab vocab = make_vocab(cfg, test.features);
  const PolicyParameters policy = load_policy_dep(policy_path, vocab, "rl");
  const auto labels = cohort_labels(test);
  const int n = cfg.eval.n_bootstrap;
  const std::uint64_t seed = stage_seeds(cfg.seed).eval;
  const ScoreMode mode = cfg.eval.score_mode;
  std::vector<TableRow> rows;
  rows.push_back({"policy", "outcome", "test", 0.0,
                  bootstrap_report(labels, policy_scores(policy, vocab, test, expert.stats, mode), n, seed)});
  rows.push_back({"untrained_policy", "outcome", "test", 0.0,
                  bootstrap_report(labels, policy_scores(untrained_policy(cfg, vocab), vocab, test, expert.stats, mode),
                                   n, seed)});
  rows.push_back({"expert", "outcome", "test", 0.0,
                  bootstrap_report(labels, expert_scores(expert, test, expert.stats), n, seed)});
  write_metric_csv(out_csv, rows);
}

void stage_robustness(const RunConfig& cfg, const std::string& test_path, const std::string& expert_path,
                      const std::string& policy_path, const std::string& out_csv) {
  ensure_absent(out_csv);
  const ExpertModel expert = load_expert_dep(expert_path);
  const Cohort test = load_imputed(test_path, expert.stats, "data");
  const ActionVocab vocab = make_vocab(cfg, test.features);
  const PolicyParameters policy = load_policy_dep(policy_path, vocab, "rl");
  const RobustnessResult r = robustness_sweep(policy, vocab, expert, test, expert.stats, cfg.eval.p_grid,
                                              cfg.eval.n_bootstrap, stage_seeds(cfg.seed).eval, cfg.eval.score_mode);
  write_metric_csv(out_csv, r.rows);
}

void stage_ood(const RunConfig& cfg, const std::string& expert_path, const std::string& policy_path,
               const std::string& cohort_out, const std::string& out_csv) {
  ensure_absent(cohort_out);
  ensure_absent(out_csv);
  const ExpertModel expert = load_expert_dep(expert_path);
  const ActionVocab vocab = make_vocab(cfg, expert.features);
  const PolicyParameters policy = load_policy_dep(policy_path, vocab, "rl");
  const Cohort b = generate_cohort(resolve_ood_cohort(cfg));
  write_cohort_jsonl(cohort_out, b);
  const auto rows =
      ood_eval(policy, vocab, expert, b, cfg.eval.n_bootstrap, stage_seeds(cfg.seed).eval, cfg.eval.score_mode);
  write_metric_csv(out_csv, rows);
}

void stage_ablate(const RunConfig& cfg, const std::string& train_path, const std::string& val_path,
                  const std::string& test_path, const std::string& expert_path, const std::string& out_csv) {
  ensure_absent(out_csv);
  const ExpertModel expert = load_expert_dep(expert_path);
  PreparedData data;
  data.stats = expert.stats;
  data.split.train = load_imputed(train_path, expert.stats, "data");
  data.split.val = load_imputed(val_path, expert.stats, "data");
  data.split.test = load_imputed(test_path, expert.stats, "data");
  const auto variants = ablation_variants();
  const auto results = ablation_suite(cfg, data, expert, variants);
  std::vector<TableRow> rows;
  for (const auto& r : results) rows.push_back({r.variant, "outcome", "test", 0.0, r.report});
  write_metric_csv(out_csv, rows);
}

PipelineResult run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages, const std::string& run_dir) {
  validate(cfg);
  fs::create_directories(run_dir);
  const std::string resolved = run_config_to_json(cfg);
  const std::string config_path = join(run_dir, artifacts::kConfig);
  if (fs::exists(config_path)) {
    std::string existing = read_text(config_path);
    while (!existing.empty() && existing.back() == '\n') existing.pop_back();
    if (existing != resolved) throw ConfigError(run_dir + " was created with a different config");
  } else {
    write_text(config_path, resolved);
  }

  auto at = [&](const char* name) { return join(run_dir, name); };
  PipelineResult result{run_dir, {}};
  for (const auto& s : parse_stages([&] {
         std::string csv;
         for (const auto& x : stages) csv += (csv.empty() ? "" : ",") + x;
         return csv;
       }())) {
    if (s == "data") {
      stage_gen_data(cfg, run_dir);
    } else if (s == "expert") {
      stage_train_expert(cfg, at(artifacts::kTrain), at(artifacts::kVal), at(artifacts::kExpert),
                         at(artifacts::kExpertReport));
    } else if (s == "distill") {
      stage_distill(cfg, at(artifacts::kTrain), at(artifacts::kExpert), at(artifacts::kPolicyStage1),
                    at(artifacts::kDsft), at(artifacts::kDistillReport));
    } else if (s == "rl") {
      stage_rl(cfg, at(artifacts::kTrain), at(artifacts::kExpert), at(artifacts::kPolicyStage1),
               at(artifacts::kPolicy), at(artifacts::kRlLog));
    } else if (s == "eval") {
      stage_eval(cfg, at(artifacts::kTest), at(artifacts::kExpert), at(artifacts::kPolicy), at(artifacts::kMetrics));
    } else if (s == "robustness") {
      stage_robustness(cfg, at(artifacts::kTest), at(artifacts::kExpert), at(artifacts::kPolicy),
                       at(artifacts::kRobustness));
    } else if (s == "ood") {
      stage_ood(cfg, at(artifacts::kExpert), at(artifacts::kPolicy), at(artifacts::kOodCohort), at(artifacts::kOod));
    } else if (s == "ablate") {
      stage_ablate(cfg, at(artifacts::kTrain), at(artifacts::kVal), at(artifacts::kTest), at(artifacts::kExpert),
                   at(artifacts::kAblation));
    }
    result.completed.push_back(s);
  }
  return result;
}

}  // namespace eagrl
