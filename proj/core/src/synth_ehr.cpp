#include "eagrl/synth_ehr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "eagrl/error.hpp"
#include "eagrl/rng.hpp"
#include "json.hpp"

namespace eagrl {
namespace {

constexpr double kTrendAmplitude = 0.8;
constexpr double kVisitNoise = 0.3;

const std::vector<std::string> kClinicalNames = {
    "albumin",   "bun",     "creatinine", "glucose",   "heart_rate", "hemoglobin",
    "lactate",   "platelets", "potassium", "resp_rate", "sodium",     "wbc"};

// Per-salient-rank weight cycles for the two generator regimes.
constexpr std::array<double, 5> kLevelA = {1.5, -1.2, 1.0, -0.9, 1.3};
constexpr std::array<double, 5> kTrendA = {0.6, 0.5, -0.5, 0.4, -0.6};
constexpr std::array<double, 5> kLevelShiftB = {0.6, 1.4, 1.2, 0.7, 1.1};
constexpr std::array<double, 5> kTrendShiftB = {1.5, 0.5, 1.4, 0.6, 1.2};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -10.0;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::size_t> allocate(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<double, 3> exact{};
  std::vector<std::size_t> counts(3);
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    exact[s] = ratios[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact[s] + 1e-9));
    assigned += counts[s];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
  });
  for (int i = 0; assigned < n; i = (i + 1) % 3, ++assigned) counts[order[i]] += 1;
  return counts;
}

Cohort subset(const Cohort& cohort, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  Cohort out;
  out.features = cohort.features;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(cohort.records[i]);
  return out;
}

}  // namespace

int Cohort::index_of(const std::string& name) const {
  const auto it = std::lower_bound(features.begin(), features.end(), name);
  if (it == features.end() || *it != name) return -1;
  return static_cast<int>(it - features.begin());
}

int Cohort::positives() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [](const PatientRecord& r) { return r.label == 1; }));
}

std::vector<std::string> default_feature_names(int n_features) {
  std::vector<std::string> names;
  for (int i = 0; i < n_features; ++i) {
    if (i < static_cast<int>(kClinicalNames.size())) {
      names.push_back(kClinicalNames[i]);
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "x%03d", i);
      names.emplace_back(buf);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

void validate(const CohortSpec& spec) {
  if (spec.n_patients < 1) throw ConfigError("cohort.n_patients must be >= 1");
  if (spec.n_features < 1) throw ConfigError("cohort.n_features must be >= 1");
  if (spec.salient_set.empty()) throw ConfigError("cohort.salient_set must be nonempty");
  const auto names = default_feature_names(spec.n_features);
  std::set<std::string> seen;
  for (const auto& s : spec.salient_set) {
    if (!std::binary_search(names.begin(), names.end(), s))
      throw ConfigError("cohort.salient_set: unknown feature '" + s + "'");
    if (!seen.insert(s).second) throw ConfigError("cohort.salient_set: duplicate feature '" + s + "'");
  }
  if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 1.0))
    throw ConfigError("cohort.missing_rate must lie in [0, 1)");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 0.5))
    throw ConfigError("cohort.label_noise must lie in [0, 0.5)");
  if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) throw ConfigError("cohort.prevalence must lie in (0, 1)");
  if (spec.distribution_id != "A" && spec.distribution_id != "B")
    throw ConfigError("cohort.distribution_id must be \"A\" or \"B\"");
  if (spec.min_visits < 2) throw ConfigError("cohort.min_visits must be >= 2");
  if (spec.max_visits < spec.min_visits) throw ConfigError("cohort.max_visits must be >= min_visits");
}

GeneratorParams generator_params(const CohortSpec& spec) {
  validate(spec);
  const auto names = default_feature_names(spec.n_features);
  const auto f_count = names.size();
  const bool shifted = spec.distribution_id == "B";
  GeneratorParams p;
  p.mean.resize(f_count);
  p.scale.resize(f_count);
  p.level_weight.assign(f_count, 0.0);
  p.trend_weight.assign(f_count, 0.0);
  for (std::size_t j = 0; j < f_count; ++j) {
    p.mean[j] = 20.0 + 15.0 * static_cast<double>(j);
    p.scale[j] = 2.0 + static_cast<double>(j % 5);
    if (shifted) {
      p.mean[j] = 1.25 * p.mean[j] + 8.0;
      p.scale[j] *= 1.5;
    }
  }
  std::vector<std::size_t> salient;
  for (const auto& s : spec.salient_set)
    salient.push_back(static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), s) - names.begin()));
  std::sort(salient.begin(), salient.end());
  double variance = 0.0;
  for (std::size_t rank = 0; rank < salient.size(); ++rank) {
    const std::size_t c = rank % kLevelA.size();
    double level = kLevelA[c];
    double trend = kTrendA[c];
    if (shifted) {
      level *= kLevelShiftB[c];
      trend *= kTrendShiftB[c];
    }
    p.level_weight[salient[rank]] = level;
    p.trend_weight[salient[rank]] = trend;
    variance += level * level * (1.0 + kVisitNoise * kVisitNoise) + trend * trend;
  }
  p.bias = std::sqrt(variance) * normal_quantile(spec.prevalence);
  return p;
}

Cohort generate_cohort(const CohortSpec& spec) {
  const GeneratorParams params = generator_params(spec);
  Cohort cohort;
  cohort.features = default_feature_names(spec.n_features);
  const int f_count = spec.n_features;
  cohort.records.reserve(spec.n_patients);
  for (int i = 0; i < spec.n_patients; ++i) {
    Rng rng(derive_seed(derive_seed(spec.seed, spec.distribution_id), static_cast<std::uint64_t>(i)));
    PatientRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%05d", spec.distribution_id.c_str(), i);
    rec.patient_id = id;
    const int span = spec.max_visits - spec.min_visits + 1;
    const int n_visits = spec.min_visits + static_cast<int>(uniform_below(static_cast<std::size_t>(span), rng));
    rec.visits.assign(n_visits, Visit(f_count));
    rec.feature_order.resize(f_count);
    std::iota(rec.feature_order.begin(), rec.feature_order.end(), 0);

    double score = params.bias;
    for (int f = 0; f < f_count; ++f) {
      const double level = standard_normal(rng);
      const double slope = standard_normal(rng);
      for (int t = 0; t < n_visits; ++t) {
        const double progress = static_cast<double>(t - (n_visits - 1)) / static_cast<double>(n_visits - 1);
        const double latent = level + kTrendAmplitude * slope * progress + kVisitNoise * standard_normal(rng);
        rec.visits[t][f] = params.mean[f] + params.scale[f] * latent;
      }
      const double first = *rec.visits.front()[f];
      const double last = *rec.visits.back()[f];
      const double trend_sign = last > first ? 1.0 : (last < first ? -1.0 : 0.0);
      score += params.level_weight[f] * (last - params.mean[f]) / params.scale[f] + params.trend_weight[f] * trend_sign;
    }
    rec.label = score > 0.0 ? 1 : 0;
    if (uniform01(rng) < spec.label_noise) rec.label = 1 - rec.label;
    rec.age = 18.0 + static_cast<double>(uniform_below(73, rng));
    rec.sex = uniform01(rng) < 0.5 ? "F" : "M";
    for (auto& visit : rec.visits)
      for (auto& value : visit)
        if (uniform01(rng) < spec.missing_rate) value.reset();
    cohort.records.push_back(std::move(rec));
  }
  return cohort;
}

FeatureStats compute_feature_stats(const Cohort& cohort) {
  const int f_count = cohort.n_features();
  std::vector<double> sum(f_count, 0.0);
  std::vector<double> sum_sq(f_count, 0.0);
  std::vector<std::size_t> count(f_count, 0);
  for (const auto& rec : cohort.records) {
    if (rec.n_features() != f_count) throw ShapeError("compute_feature_stats: record feature count mismatch");
    for (const auto& visit : rec.visits)
      for (int f = 0; f < f_count; ++f)
        if (visit[f]) {
          sum[f] += *visit[f];
          ++count[f];
        }
  }
  FeatureStats stats;
  stats.mean.assign(f_count, std::nan(""));
  stats.stddev.assign(f_count, 1.0);
  for (int f = 0; f < f_count; ++f) {
    if (count[f] == 0) continue;
    stats.mean[f] = sum[f] / static_cast<double>(count[f]);
  }
  for (const auto& rec : cohort.records)
    for (const auto& visit : rec.visits)
      for (int f = 0; f < f_count; ++f)
        if (visit[f]) sum_sq[f] += (*visit[f] - stats.mean[f]) * (*visit[f] - stats.mean[f]);
  for (int f = 0; f < f_count; ++f) {
    if (count[f] == 0) continue;
    const double sd = std::sqrt(sum_sq[f] / static_cast<double>(count[f]));
    stats.stddev[f] = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

bool has_nulls(const PatientRecord& record) {
  for (const auto& visit : record.visits)
    for (const auto& value : visit)
      if (!value) return true;
  return false;
}

std::vector<double> observed_fractions(const PatientRecord& record) {
  if (!record.observed_fraction.empty()) return record.observed_fraction;
  const int f_count = record.n_features();
  std::vector<double> frac(f_count, 0.0);
  for (const auto& visit : record.visits)
    for (int f = 0; f < f_count; ++f)
      if (visit[f]) frac[f] += 1.0;
  for (double& v : frac) v /= static_cast<double>(std::max(record.n_visits(), 1));
  return frac;
}

PatientRecord locf_impute(const PatientRecord& record, const FeatureStats& stats) {
  const int f_count = record.n_features();
  if (static_cast<int>(stats.mean.size()) != f_count) throw ShapeError("locf_impute: stats feature count mismatch");
  PatientRecord out = record;
  out.observed_fraction = observed_fractions(record);
  for (int f = 0; f < f_count; ++f) {
    std::optional<double> carried;
    for (auto& visit : out.visits) {
      if (visit[f]) {
        carried = visit[f];
        continue;
      }
      if (!carried) {
        if (std::isnan(stats.mean[f]))
          throw ImputationError("locf_impute: feature " + std::to_string(f) + " has no observed value to impute from");
        carried = stats.mean[f];
      }
      visit[f] = carried;
    }
  }
  return out;
}

Cohort locf_impute(const Cohort& cohort, const FeatureStats& stats) {
  Cohort out;
  out.features = cohort.features;
  out.records.reserve(cohort.records.size());
  for (const auto& rec : cohort.records) out.records.push_back(locf_impute(rec, stats));
  return out;
}

CohortSplit stratified_split(const Cohort& cohort, const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (cohort.records.size() < 3) throw SplitError("stratified_split: cohort needs at least 3 patients");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw SplitError("stratified_split: every ratio must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw SplitError("stratified_split: ratios must sum to 1");

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (int cls = 1; cls >= 0; --cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < cohort.records.size(); ++i)
      if (cohort.records[i].label == cls) members.push_back(i);
    shuffle_in_place(members, rng);
    const auto counts = allocate(members.size(), ratios);
    std::size_t offset = 0;
    for (int s = 0; s < 3; ++s) {
      parts[s].insert(parts[s].end(), members.begin() + static_cast<std::ptrdiff_t>(offset),
                      members.begin() + static_cast<std::ptrdiff_t>(offset + counts[s]));
      offset += counts[s];
    }
  }
  return {subset(cohort, parts[0]), subset(cohort, parts[1]), subset(cohort, parts[2])};
}

PatientRecord permute_features(const PatientRecord& record, double p_percent, std::uint64_t seed) {
  if (!(p_percent >= 0.0 && p_percent <= 1.0)) throw ArgumentError("permute_features: p_percent must lie in [0, 1]");
  const int f_count = record.n_features();
  const int chosen = static_cast<int>(std::floor(p_percent * f_count + 1e-9));
  PatientRecord out = record;
  if (chosen < 2) return out;

  Rng rng(seed);
  std::vector<int> features(f_count);
  std::iota(features.begin(), features.end(), 0);
  shuffle_in_place(features, rng);
  features.resize(chosen);
  std::sort(features.begin(), features.end());

  std::vector<int> positions;
  for (int pos = 0; pos < f_count; ++pos)
    if (std::binary_search(features.begin(), features.end(), record.feature_order[pos])) positions.push_back(pos);
  std::vector<int> moved;
  for (int pos : positions) moved.push_back(record.feature_order[pos]);
  shuffle_in_place(moved, rng);
  for (std::size_t i = 0; i < positions.size(); ++i) out.feature_order[positions[i]] = moved[i];
  return out;
}

Cohort permute_features(const Cohort& cohort, double p_percent, std::uint64_t seed) {
  Cohort out;
  out.features = cohort.features;
  out.records.reserve(cohort.records.size());
  for (std::size_t i = 0; i < cohort.records.size(); ++i)
    out.records.push_back(permute_features(cohort.records[i], p_percent, derive_seed(seed, i)));
  return out;
}

std::string record_to_json_line(const Cohort& cohort, const PatientRecord& record) {
  nlohmann::ordered_json j;
  j["patient_id"] = record.patient_id;
  auto visits = nlohmann::ordered_json::array();
  for (const auto& visit : record.visits) {
    nlohmann::ordered_json v = nlohmann::ordered_json::object();
    for (int f : record.feature_order) {
      if (visit[f])
        v[cohort.features[f]] = *visit[f];
      else
        v[cohort.features[f]] = nullptr;
    }
    visits.push_back(std::move(v));
  }
  j["visits"] = std::move(visits);
  auto order = nlohmann::ordered_json::array();
  for (int f : record.feature_order) order.push_back(cohort.features[f]);
  j["feature_order"] = std::move(order);
  j["label"] = record.label;
  j["age"] = record.age;
  j["sex"] = record.sex;
  return j.dump();
}

void write_cohort_jsonl(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& rec : cohort.records) out << record_to_json_line(cohort, rec) << '\n';
}

Cohort read_cohort_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Cohort cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    std::vector<std::string> order = j.at("feature_order").get<std::vector<std::string>>();
    if (cohort.features.empty()) {
      cohort.features = order;
      std::sort(cohort.features.begin(), cohort.features.end());
    }
    std::vector<std::string> sorted_order = order;
    std::sort(sorted_order.begin(), sorted_order.end());
    if (sorted_order != cohort.features)
      throw ShapeError(path + ":" + std::to_string(line_no) + ": feature set differs from the first record");
    PatientRecord rec;
    rec.patient_id = j.at("patient_id").get<std::string>();
    for (const auto& name : order) rec.feature_order.push_back(cohort.index_of(name));
    for (const auto& v : j.at("visits")) {
      Visit visit(cohort.features.size());
      for (std::size_t f = 0; f < cohort.features.size(); ++f) {
        const auto& cell = v.at(cohort.features[f]);
        if (!cell.is_null()) visit[f] = cell.get<double>();
      }
      rec.visits.push_back(std::move(visit));
    }
    rec.label = j.at("label").get<int>();
    rec.age = j.at("age").get<double>();
    rec.sex = j.at("sex").get<std::string>();
    if (rec.n_visits() < 2) throw ShapeError(path + ":" + std::to_string(line_no) + ": fewer than two visits");
    if (rec.label != 0 && rec.label != 1) throw ShapeError(path + ":" + std::to_string(line_no) + ": label not in {0,1}");
    cohort.records.push_back(std::move(rec));
  }
  return cohort;
}

void write_cohort_csv(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "patient_id,visit,label,age,sex";
  for (const auto& name : cohort.features) out << ',' << name;
  out << '\n';
  char buf[64];
  for (const auto& rec : cohort.records) {
    for (int t = 0; t < rec.n_visits(); ++t) {
      out << rec.patient_id << ',' << t << ',' << rec.label << ',' << rec.age << ',' << rec.sex;
      for (const auto& value : rec.visits[t]) {
        out << ',';
        if (value) {
          std::snprintf(buf, sizeof(buf), "%.17g", *value);
          out << buf;
        }
      }
      out << '\n';
    }
  }
}

}  // namespace eagrl
