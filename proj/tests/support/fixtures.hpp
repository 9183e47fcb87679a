#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "eagrl/distill.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/reasoning_env.hpp"
#include "eagrl/rng.hpp"
#include "eagrl/synth_ehr.hpp"

namespace fixtures {

inline eagrl::CohortSpec small_spec(int n, std::uint64_t seed) {
  eagrl::CohortSpec s;
  s.n_patients = n;
  s.seed = seed;
  return s;
}

struct ImputedCohort {
  eagrl::Cohort raw;
  eagrl::Cohort cohort;
  eagrl::FeatureStats stats;
};

inline ImputedCohort imputed(const eagrl::CohortSpec& spec) {
  ImputedCohort c;
  c.raw = eagrl::generate_cohort(spec);
  c.stats = eagrl::compute_feature_stats(c.raw);
  c.cohort = eagrl::locf_impute(c.raw, c.stats);
  return c;
}

// Random parameters everywhere, including the output head, so that token
// distributions are far from uniform.
inline eagrl::PolicyParameters random_policy(const eagrl::ActionVocab& vocab, int hidden, std::uint64_t seed,
                                             double scale = 0.7) {
  eagrl::PolicyParameters p = eagrl::zero_policy(vocab, hidden);
  eagrl::Rng rng(seed);
  for (double& v : p.values) v = scale * eagrl::standard_normal(rng);
  return p;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// ||analytic - central difference|| / max(||analytic||, ||central difference||).
inline double fd_relative_error(std::vector<double>& x, const std::vector<double>& analytic,
                                const std::function<double()>& f, double h = 1e-5) {
  double diff = 0.0, na = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    diff += (fd - analytic[i]) * (fd - analytic[i]);
    na += analytic[i] * analytic[i];
    nf += fd * fd;
  }
  return std::sqrt(diff) / std::max(1e-12, std::sqrt(std::max(na, nf)));
}

inline std::vector<eagrl::PatientContext> contexts(const eagrl::ActionVocab& vocab, const ImputedCohort& c,
                                                   const std::vector<int>& hint) {
  std::vector<eagrl::PatientContext> out;
  for (const auto& r : c.cohort.records) {
    eagrl::PatientContext ctx;
    ctx.patient_id = r.patient_id;
    ctx.label = r.label;
    ctx.summary = eagrl::summarize(vocab, r, c.stats);
    ctx.expert_features = hint;
    out.push_back(std::move(ctx));
  }
  return out;
}

}  // namespace fixtures
