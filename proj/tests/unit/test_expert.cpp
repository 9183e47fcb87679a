#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "eagrl/error.hpp"
#include "eagrl/eval.hpp"
#include "eagrl/expert.hpp"
#include "eagrl/metrics.hpp"
#include "eagrl/rewards.hpp"
#include "fixtures.hpp"

using namespace eagrl;

namespace {

struct Trained {
  CohortSplit split;
  FeatureStats stats;
  ExpertTrainResult result;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    const Cohort raw = generate_cohort(CohortSpec{});
    const CohortSplit s = stratified_split(raw, {8.0 / 11, 1.0 / 11, 2.0 / 11}, 42);
    out.stats = compute_feature_stats(s.train);
    out.split = {locf_impute(s.train, out.stats), locf_impute(s.val, out.stats), locf_impute(s.test, out.stats)};
    out.result = train_expert(out.split.train, out.split.val, out.stats, ExpertHyper{});
    return out;
  }();
  return t;
}

}  // namespace

TEST_SUITE("expert") {
  TEST_CASE("attention weights are a distribution") {
    const auto data = fixtures::imputed(fixtures::small_spec(40, 3));
    const ExpertModel m = init_expert(data.cohort.features, data.stats, ExpertHyper{});
    for (const auto& r : data.cohort.records) {
      const auto a = expert_attention(m, r);
      double sum = 0.0;
      for (double x : a) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      const double p = expert_predict(m, r);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }

  TEST_CASE("salient set size and ties") {
    const auto data = fixtures::imputed(fixtures::small_spec(5, 3));
    const auto& rec = data.cohort.records[0];
    const std::vector<double> flat(rec.n_features(), 1.0 / rec.n_features());
    const auto s = salience_from_weights(rec, flat, 0.5, 5);
    CHECK(s.top_k == std::vector<int>{0, 1, 2, 3, 4});
    const ExpertModel m = init_expert(data.cohort.features, data.stats, ExpertHyper{});
    CHECK(expert_salient(m, rec, 5).top_k.size() == 5);
    CHECK_THROWS_AS(expert_salient(m, rec, 13), ArgumentError);
    CHECK_THROWS_AS(expert_salient(m, rec, 0), ArgumentError);
  }

  TEST_CASE("salience maps positions back to features") {
    const auto data = fixtures::imputed(fixtures::small_spec(5, 3));
    PatientRecord rec = data.cohort.records[0];
    rec.feature_order = {11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
    std::vector<double> w(12, 0.0);
    w[0] = 0.6;  // position 0 holds feature 11
    w[1] = 0.4;
    const auto s = salience_from_weights(rec, w, 0.5, 2);
    CHECK(s.top_k == std::vector<int>{11, 10});
  }

  TEST_CASE("untrained model ranks everything equally") {
    const auto data = fixtures::imputed(fixtures::small_spec(60, 5));
    ExpertHyper h;
    h.epochs = 0;
    const auto r = train_expert(data.cohort, data.cohort, data.stats, h);
    CHECK(r.best_epoch == 0);
    std::vector<int> y;
    std::vector<double> s;
    for (const auto& rec : data.cohort.records) {
      y.push_back(rec.label);
      s.push_back(expert_predict(r.model, rec));
    }
    CHECK(auroc(y, s) == 0.5);
  }

  TEST_CASE("loss gradient matches central differences") {
    const auto data = fixtures::imputed(fixtures::small_spec(30, 8));
    ExpertModel m = init_expert(data.cohort.features, data.stats, ExpertHyper{});
    Rng rng(4);
    for (double& v : m.values) v += 0.3 * standard_normal(rng);
    std::vector<double> g;
    expert_loss(m, data.cohort, &g);
    CHECK(fixtures::fd_relative_error(m.values, g, [&] { return expert_loss(m, data.cohort, nullptr); }) < 1e-5);
  }

  TEST_CASE("training is deterministic") {
    const auto data = fixtures::imputed(fixtures::small_spec(80, 9));
    ExpertHyper h;
    h.epochs = 20;
    const auto a = train_expert(data.cohort, data.cohort, data.stats, h);
    const auto b = train_expert(data.cohort, data.cohort, data.stats, h);
    CHECK(a.model.values == b.model.values);
    CHECK(a.val_auroc == b.val_auroc);
  }

  TEST_CASE("training needs both classes and imputed records") {
    auto data = fixtures::imputed(fixtures::small_spec(30, 8));
    Cohort one = data.cohort;
    for (auto& r : one.records) r.label = 0;
    CHECK_THROWS_AS(train_expert(one, data.cohort, data.stats, ExpertHyper{}), TrainingError);
    CHECK_THROWS_AS(train_expert(data.raw, data.cohort, data.stats, ExpertHyper{}), TrainingError);
  }

  TEST_CASE("trained expert separates the classes on validation data") {
    const auto& t = trained();
    CHECK(t.result.val_auroc[t.result.best_epoch] >= 0.85);
    std::vector<double> s;
    for (const auto& r : t.split.val.records) s.push_back(expert_predict(t.result.model, r));
    CHECK(auroc(cohort_labels(t.split.val), s) == t.result.val_auroc[t.result.best_epoch]);
  }

  TEST_CASE("trained expert attends to the salient features") {
    const auto& t = trained();
    std::vector<int> truth;
    for (const auto& name : CohortSpec{}.salient_set) truth.push_back(t.split.test.index_of(name));
    double mean = 0.0;
    for (const auto& r : t.split.test.records)
      mean += attention_alignment_reward(expert_salient(t.result.model, r, 5).top_k, truth);
    mean /= static_cast<double>(t.split.test.records.size());
    // Expected Jaccard of two independent random 5-subsets of 12 features.
    double random = 0.0, total = 0.0;
    auto choose = [](int n, int k) {
      double c = 1.0;
      for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
      return c;
    };
    for (int i = 0; i <= 5; ++i) {
      const double w = choose(5, i) * choose(7, 5 - i);
      random += w * i / (10.0 - i);
      total += w;
    }
    random /= total;
    CHECK(mean > random);
  }

  TEST_CASE("reads records positionally") {
    const auto& t = trained();
    bool differs = false;
    for (std::size_t i = 0; i < 10 && !differs; ++i) {
      const auto& r = t.split.test.records[i];
      const auto p = permute_features(r, 1.0, 17 + i);
      differs = std::abs(expert_predict(t.result.model, r) - expert_predict(t.result.model, p)) > 1e-6;
    }
    CHECK(differs);
  }

  TEST_CASE("checkpoint round trip") {
    const auto& t = trained();
    const auto path = (std::filesystem::temp_directory_path() / "eagrl_expert_rt.json").string();
    save_expert(path, t.result.model);
    const ExpertModel m = load_expert(path);
    CHECK(m.values == t.result.model.values);
    CHECK(m.stats.mean == t.result.model.stats.mean);
    CHECK(m.features == t.result.model.features);
    std::filesystem::remove(path);
  }
}
