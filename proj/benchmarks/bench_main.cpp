#include <benchmark/benchmark.h>

#include "eagrl/metrics.hpp"
#include "eagrl/mcts.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/rl.hpp"
#include "eagrl/synth_ehr.hpp"

using namespace eagrl;

namespace {

struct Fixture {
  Cohort cohort;
  FeatureStats stats;
  ActionVocab vocab;
  RecordSummary summary;
  PolicyParameters policy;

  Fixture()
      : cohort([] {
          CohortSpec s;
          s.n_patients = 50;
          return generate_cohort(s);
        }()),
        stats(compute_feature_stats(cohort)),
        vocab(cohort.features),
        summary(summarize(vocab, locf_impute(cohort.records[0], stats), stats)),
        policy(init_policy(vocab, 32, 1)) {
    Rng rng(3);
    for (std::size_t i = policy.shape.wo(); i < policy.values.size(); ++i) policy.values[i] = 0.3 * standard_normal(rng);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_StepDistribution(benchmark::State& state) {
  const auto& f = fixture();
  const DecodeState st(f.vocab.n_features());
  for (auto _ : state) benchmark::DoNotOptimize(step_distribution(f.policy, f.vocab, f.summary, st));
}
BENCHMARK(BM_StepDistribution);

void BM_SampleTrajectory(benchmark::State& state) {
  const auto& f = fixture();
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(sample_tokens(f.policy, f.vocab, f.summary, rng));
}
BENCHMARK(BM_SampleTrajectory);

void BM_GradLogprob(benchmark::State& state) {
  const auto& f = fixture();
  Rng rng(2);
  const auto tokens = sample_tokens(f.policy, f.vocab, f.summary, rng);
  for (auto _ : state) benchmark::DoNotOptimize(grad_logprob(f.policy, f.vocab, f.summary, tokens));
}
BENCHMARK(BM_GradLogprob);

void BM_PatientSearch(benchmark::State& state) {
  const auto& f = fixture();
  SearchConfig cfg;
  cfg.n_rollouts = static_cast<int>(state.range(0));
  const PatientSearchDomain domain(f.policy, f.vocab, f.summary, {0, 1, 2, 3, 4}, 1, cfg.reward);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(run_search(domain, cfg, rng));
}
BENCHMARK(BM_PatientSearch)->Arg(8)->Arg(64);

void BM_Auroc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(5);
  std::vector<int> y(n);
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 3 == 0;
    s[i] = uniform01(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auroc(y, s));
}
BENCHMARK(BM_Auroc)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
