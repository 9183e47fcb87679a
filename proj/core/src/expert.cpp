#include "eagrl/expert.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "eagrl/error.hpp"
#include "eagrl/metrics.hpp"
#include "eagrl/rng.hpp"
#include "json.hpp"

namespace eagrl {
namespace {

constexpr double kInputClip = 5.0;
constexpr double kLogitClip = 30.0;

struct ExpertForward {
  std::vector<double> u;   // [F][3]
  std::vector<double> e;   // [F][E]
  std::vector<double> te;  // tanh(e)
  std::vector<double> alpha;
  std::vector<double> pooled;
  double logit = 0.0;
};

void check_record(const ExpertModel& model, const PatientRecord& record) {
  if (record.n_features() != model.n_features)
    throw ShapeError("expert: record has " + std::to_string(record.n_features()) + " features, model expects " +
                     std::to_string(model.n_features));
}

void forward(const ExpertModel& model, const PatientRecord& record, const FeatureStats& stats, ExpertForward& fw) {
  check_record(model, record);
  const int f_count = model.n_features;
  const int e_dim = model.embed_dim;
  const double* w = model.values.data();
  const auto obs = observed_fractions(record);
  fw.u.assign(static_cast<std::size_t>(f_count) * 3, 0.0);
  fw.e.assign(static_cast<std::size_t>(f_count) * e_dim, 0.0);
  fw.te.assign(fw.e.size(), 0.0);
  fw.alpha.assign(f_count, 0.0);
  fw.pooled.assign(e_dim, 0.0);
  double max_score = -1e300;
  for (int p = 0; p < f_count; ++p) {
    const int f = record.feature_order[p];
    const auto& first = record.visits.front()[f];
    const auto& last = record.visits.back()[f];
    if (!first || !last) throw ImputationError("expert: record must be imputed");
    double* u = &fw.u[3 * p];
    u[0] = std::clamp((*last - stats.mean[f]) / stats.stddev[f], -kInputClip, kInputClip);
    u[1] = std::clamp((*last - *first) / stats.stddev[f], -kInputClip, kInputClip);
    u[2] = obs[f];
    double score = w[model.position_bias() + p];
    for (int k = 0; k < e_dim; ++k) {
      const double* row = w + model.embed_w(p) + 3 * k;
      const double e = row[0] * u[0] + row[1] * u[1] + row[2] * u[2] + w[model.embed_b(p) + k];
      fw.e[p * e_dim + k] = e;
      fw.te[p * e_dim + k] = std::tanh(e);
      score += w[model.query() + k] * fw.te[p * e_dim + k];
    }
    fw.alpha[p] = score;
    max_score = std::max(max_score, score);
  }
  double z = 0.0;
  for (double& a : fw.alpha) {
    a = std::exp(a - max_score);
    z += a;
  }
  for (double& a : fw.alpha) a /= z;
  for (int p = 0; p < f_count; ++p)
    for (int k = 0; k < e_dim; ++k) fw.pooled[k] += fw.alpha[p] * fw.e[p * e_dim + k];
  fw.logit = w[model.head_b()];
  for (int k = 0; k < e_dim; ++k) fw.logit += w[model.head_w() + k] * fw.pooled[k];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-std::clamp(x, -kLogitClip, kLogitClip))); }

void backward(const ExpertModel& model, const ExpertForward& fw, double g, std::vector<double>& grad) {
  const int f_count = model.n_features;
  const int e_dim = model.embed_dim;
  const double* w = model.values.data();
  std::vector<double> dpooled(e_dim);
  for (int k = 0; k < e_dim; ++k) {
    grad[model.head_w() + k] += g * fw.pooled[k];
    dpooled[k] = g * w[model.head_w() + k];
  }
  grad[model.head_b()] += g;
  std::vector<double> dalpha(f_count, 0.0);
  double weighted = 0.0;
  for (int p = 0; p < f_count; ++p) {
    for (int k = 0; k < e_dim; ++k) dalpha[p] += dpooled[k] * fw.e[p * e_dim + k];
    weighted += fw.alpha[p] * dalpha[p];
  }
  for (int p = 0; p < f_count; ++p) {
    const double ds = fw.alpha[p] * (dalpha[p] - weighted);
    grad[model.position_bias() + p] += ds;
    const double* u = &fw.u[3 * p];
    for (int k = 0; k < e_dim; ++k) {
      const double t = fw.te[p * e_dim + k];
      grad[model.query() + k] += ds * t;
      const double de = fw.alpha[p] * dpooled[k] + ds * w[model.query() + k] * (1.0 - t * t);
      double* row = grad.data() + model.embed_w(p) + 3 * k;
      row[0] += de * u[0];
      row[1] += de * u[1];
      row[2] += de * u[2];
      grad[model.embed_b(p) + k] += de;
    }
  }
}

std::vector<double> predict_all(const ExpertModel& model, const Cohort& cohort) {
  std::vector<double> out;
  out.reserve(cohort.records.size());
  for (const auto& rec : cohort.records) out.push_back(expert_predict(model, rec));
  return out;
}

std::vector<int> labels_of(const Cohort& cohort) {
  std::vector<int> y;
  for (const auto& rec : cohort.records) y.push_back(rec.label);
  return y;
}

}  // namespace

ExpertModel init_expert(const std::vector<std::string>& features, const FeatureStats& stats, const ExpertHyper& hyper) {
  if (hyper.embed_dim < 1) throw ConfigError("expert.embed_dim must be >= 1");
  if (hyper.epochs < 0) throw ConfigError("expert.epochs must be >= 0");
  ExpertModel m;
  m.n_features = static_cast<int>(features.size());
  m.embed_dim = hyper.embed_dim;
  m.features = features;
  m.stats = stats;
  m.values.assign(m.size(), 0.0);
  Rng rng(hyper.seed);
  for (int p = 0; p < m.n_features; ++p)
    for (std::size_t i = m.embed_w(p); i < m.embed_b(p); ++i) m.values[i] = hyper.init_scale * standard_normal(rng);
  for (int k = 0; k < m.embed_dim; ++k) m.values[m.query() + k] = hyper.init_scale * standard_normal(rng);
  // Head starts at zero: the untrained model ranks every record equally.
  return m;
}

std::vector<double> expert_attention(const ExpertModel& model, const PatientRecord& record) {
  ExpertForward fw;
  forward(model, record, model.stats, fw);
  return fw.alpha;
}

double expert_predict(const ExpertModel& model, const PatientRecord& record) {
  return expert_predict(model, record, model.stats);
}

double expert_predict(const ExpertModel& model, const PatientRecord& record, const FeatureStats& stats) {
  ExpertForward fw;
  forward(model, record, stats, fw);
  return sigmoid(fw.logit);
}

SalienceReport salience_from_weights(const PatientRecord& record, const std::vector<double>& position_weights,
                                     double probability, int k) {
  const int f_count = record.n_features();
  if (k < 1 || k > f_count) throw ArgumentError("expert_salient: K must lie in [1, F]");
  std::vector<double> by_feature(f_count, 0.0);
  for (int p = 0; p < f_count; ++p) by_feature[record.feature_order[p]] = position_weights[p];
  SalienceReport report;
  report.probability = probability;
  report.ranked_features.resize(f_count);
  std::iota(report.ranked_features.begin(), report.ranked_features.end(), 0);
  std::stable_sort(report.ranked_features.begin(), report.ranked_features.end(),
                   [&](int a, int b) { return by_feature[a] > by_feature[b]; });
  report.top_k.assign(report.ranked_features.begin(), report.ranked_features.begin() + k);
  return report;
}

SalienceReport expert_salient(const ExpertModel& model, const PatientRecord& record, int k) {
  if (k < 1 || k > model.n_features) throw ArgumentError("expert_salient: K must lie in [1, F]");
  ExpertForward fw;
  forward(model, record, model.stats, fw);
  return salience_from_weights(record, fw.alpha, sigmoid(fw.logit), k);
}

double expert_loss(const ExpertModel& model, const Cohort& cohort, std::vector<double>* grad) {
  if (grad) grad->assign(model.values.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(cohort.records.size());
  double loss = 0.0;
  ExpertForward fw;
  for (const auto& rec : cohort.records) {
    forward(model, rec, model.stats, fw);
    // log(1 + exp(-m)) in a numerically stable form, m = signed margin.
    const double margin = rec.label == 1 ? fw.logit : -fw.logit;
    loss += inv_n * (std::max(-margin, 0.0) + std::log1p(std::exp(-std::abs(margin))));
    if (grad) {
      const double p = 1.0 / (1.0 + std::exp(-fw.logit));
      backward(model, fw, inv_n * (p - rec.label), *grad);
    }
  }
  return loss;
}

ExpertTrainResult train_expert(const Cohort& train, const Cohort& val, const FeatureStats& stats,
                               const ExpertHyper& hyper) {
  const int pos = train.positives();
  if (pos == 0 || pos == static_cast<int>(train.records.size()))
    throw TrainingError("train_expert: training cohort must contain both classes");
  for (const auto& rec : train.records)
    if (has_nulls(rec)) throw TrainingError("train_expert: training cohort must be imputed");
  const auto val_labels = labels_of(val);

  ExpertModel model = init_expert(train.features, stats, hyper);
  model.trained = true;
  ExpertTrainResult result{model, {}, 0};
  result.val_auroc.push_back(auroc(val_labels, predict_all(model, val)));
  double best = result.val_auroc.back();
  std::vector<double> grad;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const double loss = expert_loss(model, train, &grad);
    if (!std::isfinite(loss)) throw TrainingError("train_expert: non-finite loss");
    for (std::size_t i = 0; i < grad.size(); ++i) model.values[i] -= hyper.lr * grad[i];
    const double score = auroc(val_labels, predict_all(model, val));
    result.val_auroc.push_back(score);
    if (score > best) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void save_expert(const std::string& path, const ExpertModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = "expert";
  j["features"] = model.features;
  j["n_features"] = model.n_features;
  j["embed_dim"] = model.embed_dim;
  j["trained"] = model.trained;
  j["stats_mean"] = model.stats.mean;
  j["stats_stddev"] = model.stats.stddev;
  j["values"] = model.values;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

ExpertModel load_expert(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  if (j.at("kind").get<std::string>() != "expert") throw IoError(path + " is not an expert checkpoint");
  ExpertModel m;
  m.features = j.at("features").get<std::vector<std::string>>();
  m.n_features = j.at("n_features").get<int>();
  m.embed_dim = j.at("embed_dim").get<int>();
  m.trained = j.at("trained").get<bool>();
  m.stats.mean = j.at("stats_mean").get<std::vector<double>>();
  m.stats.stddev = j.at("stats_stddev").get<std::vector<double>>();
  m.values = j.at("values").get<std::vector<double>>();
  if (m.values.size() != m.size()) throw ShapeError(path + ": parameter count does not match its shape");
  return m;
}

}  // namespace eagrl
