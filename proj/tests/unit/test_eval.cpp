#include <cmath>

#include "doctest.h"
#include "eagrl/error.hpp"
#include "eagrl/eval.hpp"
#include "eagrl/metrics.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eagrl;

TEST_SUITE("eval") {
  TEST_CASE("metric examples") {
    CHECK(auroc(std::vector<int>{1, 0}, std::vector<double>{0.9, 0.1}) == 1.0);
    CHECK(auroc(std::vector<int>{1, 0}, std::vector<double>{0.1, 0.9}) == 0.0);
    CHECK(auroc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{0.8, 0.8, 0.6, 0.4}) == 0.625);
    CHECK(auprc(std::vector<int>{1, 0}, std::vector<double>{0.9, 0.1}) == 1.0);
    CHECK(auprc(std::vector<int>{0, 1}, std::vector<double>{0.9, 0.1}) == 0.5);
    CHECK(auprc(std::vector<int>{1, 1, 1}, std::vector<double>{0.2, 0.9, 0.5}) == 1.0);
    CHECK(auprc(std::vector<int>{0, 1}, std::vector<double>{0.5, 0.5}) == 0.5);
    CHECK_THROWS_AS(auroc(std::vector<int>{1, 1}, std::vector<double>{0.2, 0.3}), MetricError);
    CHECK_THROWS_AS(auprc(std::vector<int>{0, 0}, std::vector<double>{0.2, 0.3}), MetricError);
  }

  TEST_CASE("metrics match enumeration on small sets") {
    Rng rng(5);
    for (int n = 1; n <= 7; ++n) {
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[i] = (mask >> i) & 1;
        const int pos = __builtin_popcount(mask);
        std::vector<double> s(n);
        for (double& v : s) v = static_cast<double>(uniform_below(3, rng)) / 2.0;
        if (pos > 0 && pos < n) CHECK(auroc(y, s) == oracles::pair_auroc(y, s));
        if (pos > 0) CHECK(auprc(y, s) == oracles::ordering_auprc(y, s));
      }
    }
  }

  TEST_CASE("AUROC is invariant under increasing transforms") {
    Rng rng(6);
    for (int c = 0; c < 30; ++c) {
      std::vector<int> y(20);
      std::vector<double> s(20), t(20);
      for (int i = 0; i < 20; ++i) {
        y[i] = i % 3 == 0;
        s[i] = standard_normal(rng);
        t[i] = std::exp(3.0 * s[i]) + 1.0;
      }
      CHECK(auroc(y, s) == auroc(y, t));
    }
  }

  TEST_CASE("random scores give the expected AUPRC") {
    Rng rng(7);
    const int n = 200, pos = 60, reps = 400;
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) y[i] = i < pos;
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      std::vector<double> s(n);
      for (double& v : s) v = uniform01(rng);
      const double a = auprc(y, s);
      sum += a;
      sq += a * a;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt(sq / reps - mean * mean);
    // Exact expectation under a uniformly random ranking: the i-th positive sits
    // at rank r with hypergeometric probability C(r-1, i-1) C(n-r, P-i) / C(n, P).
    auto log_choose = [](int a, int b) { return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0); };
    double expect = 0.0;
    for (int i = 1; i <= pos; ++i)
      for (int r = i; r <= n - pos + i; ++r)
        expect += static_cast<double>(i) / r *
                  std::exp(log_choose(r - 1, i - 1) + log_choose(n - r, pos - i) - log_choose(n, pos));
    expect /= pos;
    CHECK(std::abs(expect - 0.3) < 0.02);
    CHECK(std::abs(mean - expect) < 3.0 * sd / std::sqrt(reps));
  }

  TEST_CASE("bootstrap protocol") {
    std::vector<int> y{1, 1, 0, 0, 0, 1, 0, 0};
    std::vector<double> sep{0.9, 0.9, 0.1, 0.1, 0.1, 0.9, 0.1, 0.1};
    const auto b = bootstrap_metric(y, sep, auroc, 100, 3);
    CHECK(b.samples.size() == 100);
    CHECK(b.mean == 1.0);
    CHECK(b.std == 0.0);
    std::vector<double> noisy{0.9, 0.2, 0.4, 0.1, 0.7, 0.6, 0.3, 0.5};
    const auto r1 = bootstrap_report(y, noisy, 100, 11);
    const auto r2 = bootstrap_report(y, noisy, 100, 11);
    CHECK(r1.auroc_samples == r2.auroc_samples);
    CHECK(r1.auprc_samples == r2.auprc_samples);
    CHECK(r1.auroc_samples.size() == 100);
    double m = 0.0, v = 0.0;
    for (double x : r1.auroc_samples) m += x;
    m /= 100.0;
    for (double x : r1.auroc_samples) v += (x - m) * (x - m);
    CHECK(std::abs(r1.auroc_mean - m) < 1e-9);
    CHECK(std::abs(r1.auroc_std - std::sqrt(v / 100.0)) < 1e-9);
    CHECK(r1.auroc_mean >= 0.0);
    CHECK(r1.auroc_mean <= 100.0);
    CHECK(bootstrap_report(y, noisy, 100, 12).auroc_samples != r1.auroc_samples);
  }

  TEST_CASE("metric CSV layout") {
    TableRow row;
    row.model = "policy";
    row.split = "test";
    row.report.n_bootstrap = 100;
    row.report.seed = 9;
    const std::string csv = metric_csv(std::span<const TableRow>(&row, 1));
    CHECK(csv.rfind("model,task,split,p_percent,auroc_mean,auroc_std,auprc_mean,auprc_std,n_boot,seed\n", 0) == 0);
    CHECK(csv.find("policy,outcome,test,") != std::string::npos);
  }

  TEST_CASE("robustness sweep leaves policy scores untouched") {
    const auto data = fixtures::imputed(fixtures::small_spec(60, 51));
    const ActionVocab vocab(data.cohort.features);
    const PolicyParameters p = fixtures::random_policy(vocab, 8, 3, 0.5);
    ExpertHyper h;
    h.epochs = 30;
    const auto expert = train_expert(data.cohort, data.cohort, data.stats, h).model;
    const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
    const auto r = robustness_sweep(p, vocab, expert, data.cohort, data.stats, grid, 20, 4, ScoreMode::kExpectedBucket);
    CHECK(r.rows.size() == 8);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(r.policy_scores[i] == r.policy_scores[0]);
    CHECK(r.policy_scores[0] == policy_scores(p, vocab, data.cohort, data.stats, ScoreMode::kExpectedBucket));
    CHECK(r.expert_scores[0] == expert_scores(expert, data.cohort, data.stats));
    CHECK(r.expert_scores[3] != r.expert_scores[0]);
  }

  TEST_CASE("cross-distribution evaluation checks the schema") {
    const auto data = fixtures::imputed(fixtures::small_spec(40, 52));
    const ActionVocab vocab(data.cohort.features);
    const PolicyParameters p = zero_policy(vocab, 4);
    ExpertHyper h;
    h.epochs = 5;
    const auto expert = train_expert(data.cohort, data.cohort, data.stats, h).model;
    CohortSpec other = fixtures::small_spec(40, 53);
    other.distribution_id = "B";
    CHECK(ood_eval(p, vocab, expert, generate_cohort(other), 10, 1, ScoreMode::kExpectedBucket).size() == 2);
    Cohort renamed = generate_cohort(other);
    renamed.features[0] = "zz_unknown";
    CHECK_THROWS_AS(ood_eval(p, vocab, expert, renamed, 10, 1, ScoreMode::kExpectedBucket),
                    EvaluationError);
  }
}
