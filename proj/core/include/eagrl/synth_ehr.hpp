#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eagrl {

// One visit: values indexed by canonical feature index. A missing entry is an
// explicit nullopt, never an absent key.
using Visit = std::vector<std::optional<double>>;

/// A patient's visit-ordered feature matrix with its binary outcome.
///
/// Values are keyed by canonical feature index (the position of the feature
/// name in the cohort's sorted name list). `feature_order` is serialization
/// metadata: the order in which features are presented to positional readers.
/// Name-keyed consumers ignore it.
struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;
  std::vector<int> feature_order;
  int label = 0;
  double age = 0.0;
  std::string sex;
  // Per-feature fraction of visits with an observed value. Filled by
  // locf_impute before nulls are overwritten; empty on raw records.
  std::vector<double> observed_fraction;

  int n_visits() const { return static_cast<int>(visits.size()); }
  int n_features() const { return static_cast<int>(feature_order.size()); }
};

struct Cohort {
  std::vector<std::string> features;  // canonical (lexicographically sorted)
  std::vector<PatientRecord> records;

  int n_features() const { return static_cast<int>(features.size()); }
  int index_of(const std::string& name) const;  // -1 when absent
  int positives() const;
};

struct CohortSpec {
  int n_patients = 550;
  int n_features = 12;
  std::vector<std::string> salient_set = {"creatinine", "glucose", "lactate", "resp_rate", "wbc"};
  double missing_rate = 0.1;
  double label_noise = 0.05;
  std::string distribution_id = "A";
  std::uint64_t seed = 7;
  double prevalence = 0.3;
  int min_visits = 2;
  int max_visits = 7;
};

// Throws ConfigError naming the first violated field.
void validate(const CohortSpec& spec);

// Canonical feature names for a cohort of F features: clinical lab names first,
// synthetic "x###" names beyond them. Always sorted.
std::vector<std::string> default_feature_names(int n_features);

// Constants of the generator's label rule for one spec. Weights are zero for
// non-salient features.
struct GeneratorParams {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> level_weight;
  std::vector<double> trend_weight;
  double bias = 0.0;
};

GeneratorParams generator_params(const CohortSpec& spec);

// Deterministic given spec.seed. Labels are sign(score) of a linear rule over
// salient last-value z-scores and trend signs (computed before missingness is
// applied), flipped with probability label_noise.
Cohort generate_cohort(const CohortSpec& spec);

/// Per-feature mean and population standard deviation over every observed
/// value in a cohort. A feature with no observation anywhere has NaN mean.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

FeatureStats compute_feature_stats(const Cohort& cohort);

// Last observation carried forward. Leading nulls take stats.mean; throws
// ImputationError when that mean is unavailable.
PatientRecord locf_impute(const PatientRecord& record, const FeatureStats& stats);
Cohort locf_impute(const Cohort& cohort, const FeatureStats& stats);

bool has_nulls(const PatientRecord& record);

// Observed fraction per canonical feature; uses the stored values when the
// record was imputed, otherwise counts non-null entries.
std::vector<double> observed_fractions(const PatientRecord& record);

struct CohortSplit {
  Cohort train;
  Cohort val;
  Cohort test;
};

// Stratified three-way partition. Split sizes follow largest-remainder
// allocation of the cohort size; positives follow largest-remainder allocation
// of the positive count, so every split is within one patient of proportional.
CohortSplit stratified_split(const Cohort& cohort, const std::array<double, 3>& ratios, std::uint64_t seed);

// Shuffles the serialization order of floor(p * F) uniformly chosen features
// among their own positions. Values, names and labels are untouched.
PatientRecord permute_features(const PatientRecord& record, double p_percent, std::uint64_t seed);
Cohort permute_features(const Cohort& cohort, double p_percent, std::uint64_t seed);

// JSON-lines persistence: {patient_id, visits:[{feature:value|null}], feature_order,
// label, age, sex}, with visit keys written in feature_order.
void write_cohort_jsonl(const std::string& path, const Cohort& cohort);
Cohort read_cohort_jsonl(const std::string& path);
std::string record_to_json_line(const Cohort& cohort, const PatientRecord& record);

// Long-format CSV: one row per (patient, visit).
void write_cohort_csv(const std::string& path, const Cohort& cohort);

}  // namespace eagrl
