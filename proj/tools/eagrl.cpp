// Command-line front end: one subcommand per pipeline stage plus `pipeline`,
// which runs a stage list inside a run directory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "eagrl/config.hpp"
#include "eagrl/error.hpp"
#include "eagrl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run config (defaults apply to absent keys)");
  app->add_option("--seed", c.seed, "Root seed, overrides the config");
  app->add_option("--workers", c.workers, "Maximum worker threads")->check(CLI::PositiveNumber);
}

eagrl::RunConfig resolve(const Common& c) {
  eagrl::RunConfig cfg = c.config.empty() ? eagrl::RunConfig{} : eagrl::load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  eagrl::validate(cfg);
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sibling(const std::string& path, const std::string& name) {
  return (fs::path(path).parent_path() / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expert-attention guided reasoning policy: data, training and evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string out, cohort, val, test, expert, policy, policy_in, policy_out, dsft_out, report_out, log_out, stages;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic cohort and its stratified split");
  add_common(gen, common);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tex = app.add_subcommand("train-expert", "Train the feature-attention expert");
  add_common(tex, common);
  tex->add_option("--cohort", cohort, "Training cohort (JSONL)")->required();
  tex->add_option("--val", val, "Validation cohort (JSONL)")->required();
  tex->add_option("--out", out, "Expert checkpoint path")->required();

  auto* dis = app.add_subcommand("distill", "Stage 1: expert-guided search and supervised fitting");
  add_common(dis, common);
  dis->add_option("--cohort", cohort, "Training cohort (JSONL)")->required();
  dis->add_option("--expert", expert, "Expert checkpoint")->required();
  dis->add_option("--policy-out", policy_out, "Stage-1 policy checkpoint path")->required();
  dis->add_option("--dsft-out", dsft_out, "Distilled trajectories (JSONL)")->required();
  dis->add_option("--report-out", report_out, "Report path (default: next to the policy)");

  auto* rl = app.add_subcommand("rl-train", "Stage 2: attention-aligned policy optimization");
  add_common(rl, common);
  rl->add_option("--cohort", cohort, "Training cohort (JSONL)")->required();
  rl->add_option("--expert", expert, "Expert checkpoint")->required();
  rl->add_option("--policy-in", policy_in, "Stage-1 policy checkpoint")->required();
  rl->add_option("--policy-out", policy_out, "Output policy checkpoint")->required();
  rl->add_option("--log-out", log_out, "Per-iteration CSV (default: next to the policy)");

  auto* ev = app.add_subcommand("eval", "Bootstrap AUROC/AUPRC on a test cohort");
  add_common(ev, common);
  ev->add_option("--cohort", test, "Test cohort (JSONL)")->required();
  ev->add_option("--expert", expert, "Expert checkpoint")->required();
  ev->add_option("--policy", policy, "Policy checkpoint")->required();
  ev->add_option("--out", out, "Metrics CSV")->required();

  auto* rob = app.add_subcommand("robustness", "Feature-order perturbation sweep");
  add_common(rob, common);
  rob->add_option("--cohort", test, "Test cohort (JSONL)")->required();
  rob->add_option("--expert", expert, "Expert checkpoint")->required();
  rob->add_option("--policy", policy, "Policy checkpoint")->required();
  rob->add_option("--out", out, "Metrics CSV")->required();

  auto* ood = app.add_subcommand("ood", "Evaluate on a cohort from another distribution");
  add_common(ood, common);
  ood->add_option("--expert", expert, "Expert checkpoint")->required();
  ood->add_option("--policy", policy, "Policy checkpoint")->required();
  ood->add_option("--out", out, "Metrics CSV")->required();
  ood->add_option("--cohort-out", cohort, "Where to write the generated cohort (default: next to the CSV)");

  auto* abl = app.add_subcommand("ablate", "Train and evaluate the full method and its ablations");
  add_common(abl, common);
  abl->add_option("--train", cohort, "Training cohort (JSONL)")->required();
  abl->add_option("--val", val, "Validation cohort (JSONL)")->required();
  abl->add_option("--test", test, "Test cohort (JSONL)")->required();
  abl->add_option("--expert", expert, "Expert checkpoint")->required();
  abl->add_option("--out", out, "Metrics CSV")->required();

  auto* pipe = app.add_subcommand("pipeline", "Run stages in dependency order inside a run directory");
  add_common(pipe, common);
  pipe->add_option("--out", out, "Run directory (default: runs/<timestamp>)");
  pipe->add_option("--stages", stages, "Comma-separated stages or 'all'")->default_val("all");

  CLI11_PARSE(app, argc, argv);

  try {
    const eagrl::RunConfig cfg = resolve(common);
    if (gen->parsed()) {
      eagrl::stage_gen_data(cfg, out);
      std::cout << slurp((fs::path(out) / eagrl::artifacts::kDataReport).string());
    } else if (tex->parsed()) {
      const std::string report = sibling(out, "expert_report.json");
      eagrl::stage_train_expert(cfg, cohort, val, out, report);
      std::cout << slurp(report);
    } else if (dis->parsed()) {
      if (report_out.empty()) report_out = sibling(policy_out, eagrl::artifacts::kDistillReport);
      eagrl::stage_distill(cfg, cohort, expert, policy_out, dsft_out, report_out);
      std::cout << slurp(report_out);
    } else if (rl->parsed()) {
      if (log_out.empty()) log_out = sibling(policy_out, eagrl::artifacts::kRlLog);
      eagrl::stage_rl(cfg, cohort, expert, policy_in, policy_out, log_out);
      std::cout << "wrote " << policy_out << " and " << log_out << '\n';
    } else if (ev->parsed()) {
      eagrl::stage_eval(cfg, test, expert, policy, out);
      std::cout << slurp(out);
    } else if (rob->parsed()) {
      eagrl::stage_robustness(cfg, test, expert, policy, out);
      std::cout << slurp(out);
    } else if (ood->parsed()) {
      if (cohort.empty()) cohort = sibling(out, eagrl::artifacts::kOodCohort);
      eagrl::stage_ood(cfg, expert, policy, cohort, out);
      std::cout << slurp(out);
    } else if (abl->parsed()) {
      eagrl::stage_ablate(cfg, cohort, val, test, expert, out);
      std::cout << slurp(out);
    } else if (pipe->parsed()) {
      const std::string dir = out.empty() ? eagrl::timestamped_run_dir(".") : out;
      const auto result = eagrl::run_pipeline(cfg, {stages}, dir);
      std::cout << "run directory: " << result.run_dir << '\n';
      for (const auto& s : result.completed) std::cout << "  done: " << s << '\n';
    }
  } catch (const eagrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const eagrl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
