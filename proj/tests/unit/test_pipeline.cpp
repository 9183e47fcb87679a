#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "eagrl/error.hpp"
#include "eagrl/pipeline.hpp"

using namespace eagrl;
namespace fs = std::filesystem;

namespace {

RunConfig tiny() {
  RunConfig c;
  c.seed = 5;
  c.cohort.n_patients = 66;
  c.expert.epochs = 20;
  c.search.n_rollouts = 2;
  c.sft_epochs = 2;
  c.rl.iterations = 2;
  c.rl.groups_per_iteration = 2;
  c.rl.inner_epochs = 1;
  c.eval.n_bootstrap = 10;
  c.eval.ood_patients = 30;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults are the reference hyperparameters") {
    const RunConfig c;
    CHECK(c.seed == 42);
    CHECK(c.search.n_rollouts == 8);
    CHECK(c.search.max_depth == 7);
    CHECK(c.search.uct_weight == 1.0);
    CHECK(c.search.branching == 3);
    CHECK(c.search.topk == 2);
    CHECK(c.reward.theta == 0.5);
    CHECK(c.reward.beta == 1.0);
    CHECK(c.reward.lambda2 == 0.6);
    CHECK(c.reward.k == 5);
    CHECK(c.rl.group_size == 8);
    CHECK(c.rl.clip.eps_low == 0.2);
    CHECK(c.rl.clip.eps_min == 0.2);
    CHECK(c.rl.clip.eps_max == 0.4);
    CHECK(c.eval.n_bootstrap == 100);
    CHECK(c.eval.p_grid == std::vector<double>{0.0, 0.25, 0.5, 1.0});
    CHECK_NOTHROW(validate(c));
  }

  TEST_CASE("parsing overrides and round trip") {
    const RunConfig c = parse_run_config(R"({"seed": 9, "rl": {"iterations": 3, "optimizer": "adam"},
                                             "eval": {"score_mode": "greedy_bucket"}})");
    CHECK(c.seed == 9);
    CHECK(c.rl.iterations == 3);
    CHECK(c.rl.use_adam);
    CHECK(c.eval.score_mode == ScoreMode::kGreedyBucket);
    CHECK(c.search.n_rollouts == 8);
    CHECK(run_config_to_json(parse_run_config(run_config_to_json(c))) == run_config_to_json(c));
  }

  TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_run_config(R"({"sead": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"rl": {"lr": 0.1, "lrr": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  }

  TEST_CASE("validation lists every violated field") {
    try {
      parse_run_config(R"({"search": {"n_rollouts": 0}, "reward": {"lambda2": 2.0}, "rl": {"lr": -1}})");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      const std::string m = e.what();
      CHECK(m.find("search.n_rollouts") != std::string::npos);
      CHECK(m.find("reward.lambda2") != std::string::npos);
      CHECK(m.find("rl.lr") != std::string::npos);
    }
  }

  TEST_CASE("stage seeds are distinct and stable") {
    const StageSeeds a = stage_seeds(42), b = stage_seeds(42);
    CHECK(a.stage1 == b.stage1);
    CHECK(a.split == 42);
    CHECK(a.stage1 != a.stage2);
    CHECK(a.cohort != stage_seeds(43).cohort);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("stage names") {
    CHECK(parse_stages("all").size() == pipeline_stages().size() - 1);
    CHECK(parse_stages("eval,data") == std::vector<std::string>{"data", "eval"});
    CHECK_THROWS_AS(parse_stages("train"), ArgumentError);
  }

  TEST_CASE("evaluation without a policy is a dependency error") {
    const fs::path d = fresh_dir("eagrl_pipe_dep");
    try {
      run_pipeline(tiny(), {"eval"}, d.string());
      FAIL("expected a dependency error");
    } catch (const DependencyError& e) {
      CHECK(std::string(e.what()).find("run stage") != std::string::npos);
    }
    fs::remove_all(d);
  }

  TEST_CASE("end to end runs are reproducible and write-once") {
    const fs::path a = fresh_dir("eagrl_pipe_a");
    const fs::path b = fresh_dir("eagrl_pipe_b");
    const RunConfig cfg = tiny();
    const auto ra = run_pipeline(cfg, {"all"}, a.string());
    CHECK(ra.completed.size() == 7);
    run_pipeline(cfg, {"data", "expert", "distill"}, b.string());
    run_pipeline(cfg, {"rl", "eval", "robustness", "ood"}, b.string());
    for (const char* f : {artifacts::kMetrics, artifacts::kRobustness, artifacts::kOod, artifacts::kRlLog,
                          artifacts::kPolicy, artifacts::kDsft, artifacts::kConfig}) {
      CHECK(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK_THROWS_AS(run_pipeline(cfg, {"eval"}, a.string()), StageError);
    RunConfig other = cfg;
    other.seed = 6;
    CHECK_THROWS_AS(run_pipeline(other, {"eval"}, a.string()), ConfigError);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}
