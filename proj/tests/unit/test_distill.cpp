#include <cmath>

#include "doctest.h"
#include "eagrl/distill.hpp"
#include "eagrl/error.hpp"
#include "fixtures.hpp"

using namespace eagrl;

namespace {

struct Setup {
  fixtures::ImputedCohort data = fixtures::imputed(fixtures::small_spec(20, 41));
  ActionVocab vocab{data.cohort.features};
  std::vector<PatientContext> patients = fixtures::contexts(vocab, data, {0, 3, 5, 8, 11});
};

}  // namespace

TEST_SUITE("distill") {
  TEST_CASE("stage 1 collects top-k trajectories per patient and fits them") {
    Setup s;
    const PolicyParameters init = init_policy(s.vocab, 8, 1);
    Stage1Config cfg;
    cfg.sft_epochs = 10;
    const Stage1Result r = run_stage1(s.vocab, s.patients, init, cfg);
    CHECK(r.dsft.size() >= 20);
    CHECK(r.dsft.size() <= 40);
    CHECK(r.report.n_patients == 20);
    CHECK(r.report.n_trajectories == static_cast<int>(r.dsft.size()));

    // Every entry is the top-k of its patient's terminals.
    std::size_t next = 0;
    for (std::size_t i = 0; i < s.patients.size(); ++i) {
      const auto top = extract_topk(r.terminals[i], cfg.search.topk);
      for (const auto& t : top) {
        REQUIRE(next < r.dsft.size());
        CHECK(r.dsft[next].patient_id == s.patients[i].patient_id);
        CHECK(r.dsft[next].token_ids == t.tokens);
        CHECK(r.dsft[next].reward.total == t.reward.total);
        ++next;
      }
    }
    CHECK(next == r.dsft.size());

    // The fitted policy prefers its data.
    std::vector<SftExample> ex;
    for (const auto& d : r.dsft)
      for (const auto& p : s.patients)
        if (p.patient_id == d.patient_id) ex.push_back({&p.summary, d.token_ids});
    CHECK(mean_logprob(r.params, s.vocab, ex) > mean_logprob(init, s.vocab, ex));
    CHECK(r.report.sft_loss_history.back() < r.report.sft_loss_history.front());

    // Report statistics recompute from D_SFT.
    const DistillReport again = summarize_dsft(r.dsft, 20);
    CHECK(std::abs(again.mean_total_reward - r.report.mean_total_reward) < 1e-12);
    CHECK(std::abs(again.mean_r_att - r.report.mean_r_att) < 1e-12);
    double sum = 0.0;
    for (const auto& d : r.dsft) sum += d.reward.total;
    CHECK(std::abs(sum / r.dsft.size() - r.report.mean_total_reward) < 1e-12);
  }

  TEST_CASE("stage 1 does not depend on the worker count") {
    Setup s;
    const PolicyParameters init = init_policy(s.vocab, 8, 2);
    Stage1Config cfg;
    cfg.sft_epochs = 3;
    const auto a = run_stage1(s.vocab, s.patients, init, cfg);
    cfg.workers = 4;
    const auto b = run_stage1(s.vocab, s.patients, init, cfg);
    CHECK(a.params.values == b.params.values);
    CHECK(a.dsft.size() == b.dsft.size());
  }

  TEST_CASE("class balancing equalizes label counts") {
    Setup s;
    Stage1Config cfg;
    cfg.sft_epochs = 1;
    cfg.balance_classes = true;
    const auto r = run_stage1(s.vocab, s.patients, init_policy(s.vocab, 8, 3), cfg);
    int pos = 0;
    for (const auto& d : r.dsft) pos += d.label;
    CHECK(2 * pos == static_cast<int>(r.dsft.size()));
  }

  TEST_CASE("stage 1 configuration checks") {
    Setup s;
    Stage1Config cfg;
    cfg.search.max_depth = 6;
    CHECK_THROWS_AS(validate(cfg, s.vocab), ConfigError);
    cfg.search.max_depth = 7;
    cfg.search.reward.k = 4;
    CHECK_THROWS_AS(validate(cfg, s.vocab), ConfigError);
    CHECK_THROWS_AS(run_stage1(s.vocab, std::span<const PatientContext>(), init_policy(s.vocab, 4, 1), Stage1Config{}),
                    StageError);
  }

  TEST_CASE("report serializes its fields") {
    DistillReport r;
    r.n_patients = 3;
    r.n_trajectories = 6;
    r.sft_loss_history = {2.0, 1.0};
    const std::string j = report_to_json(r);
    CHECK(j.find("\"n_trajectories\"") != std::string::npos);
    CHECK(j.find("\"sft_loss_history\"") != std::string::npos);
  }
}
