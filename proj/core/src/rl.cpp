#include "eagrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "eagrl/error.hpp"
#include "eagrl/parallel.hpp"

namespace eagrl {

void validate(const ClipConfig& cfg) {
  if (!(cfg.eps_low > 0.0 && cfg.eps_low < 1.0)) throw ConfigError("clip.eps_low must lie in (0, 1)");
  if (!(cfg.eps_min >= 0.0)) throw ConfigError("clip.eps_min must be >= 0");
  if (!(cfg.eps_min <= cfg.eps_max)) throw ConfigError("clip.eps_min must not exceed clip.eps_max");
}

void validate(const RlConfig& cfg) {
  validate(cfg.clip);
  validate(cfg.reward);
  if (cfg.group_size < 2) throw ConfigError("rl.group_size must be >= 2");
  if (cfg.iterations < 0) throw ConfigError("rl.iterations must be >= 0");
  if (cfg.groups_per_iteration < 1) throw ConfigError("rl.groups_per_iteration must be >= 1");
  if (cfg.inner_epochs < 1) throw ConfigError("rl.inner_epochs must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("rl.lr must be > 0");
  if (cfg.eval_every < 0) throw ConfigError("rl.eval_every must be >= 0");
}

GroupBatch sample_group(const PolicyParameters& old, const ActionVocab& vocab, const PatientContext& patient, int g,
                        const RewardConfig& reward, Rng& rng) {
  if (g < 2) throw ArgumentError("sample_group: G must be >= 2");
  GroupBatch batch;
  batch.trajectories.reserve(g);
  for (int i = 0; i < g; ++i) {
    const Trajectory t = sample_trajectory(old, vocab, patient.summary, rng);
    GroupTrajectory gt;
    gt.tokens = t.token_ids;
    gt.logp_old = trajectory_logprob(old, vocab, patient.summary, t.token_ids).per_token;
    gt.reward = score_prediction(t.prediction, t.declared, patient.label, patient.expert_features, reward);
    gt.key_positions = t.key_positions;
    batch.trajectories.push_back(std::move(gt));
  }
  return batch;
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

double mean_key_entropy(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                        std::span<const int> tokens, std::span<const int> key_positions) {
  if (key_positions.empty()) throw ArgumentError("mean_key_entropy: no key positions");
  DecodeState state(vocab.n_features());
  double total = 0.0;
  std::size_t next = 0;
  std::vector<int> keys(key_positions.begin(), key_positions.end());
  std::sort(keys.begin(), keys.end());
  for (int t = 0; t < static_cast<int>(tokens.size()) && next < keys.size(); ++t) {
    if (t == keys[next]) {
      total += token_entropy(params, vocab, summary, state);
      ++next;
    }
    advance(vocab, state, tokens[t]);
  }
  if (next != keys.size()) throw ArgumentError("mean_key_entropy: key position beyond the trajectory");
  return total / static_cast<double>(keys.size());
}

std::vector<double> adaptive_clip_bounds(std::span<const double> entropies, const ClipConfig& cfg) {
  std::vector<double> out(entropies.size(), cfg.eps_min);
  if (entropies.empty()) return out;
  const auto [lo, hi] = std::minmax_element(entropies.begin(), entropies.end());
  const double h_min = *lo;
  const double spread = *hi - h_min;
  if (spread < 1e-12) return out;
  for (std::size_t i = 0; i < entropies.size(); ++i)
    out[i] = cfg.eps_min + (cfg.eps_max - cfg.eps_min) * (entropies[i] - h_min) / spread;
  return out;
}

double clip_fn(double r, double eps_low, double eps_up) { return std::max(1.0 - eps_low, std::min(r, 1.0 + eps_up)); }

void prepare_batch(GroupBatch& batch, const PolicyParameters& old, const ActionVocab& vocab,
                   const RecordSummary& summary, const ClipConfig& clip, bool adaptive) {
  std::vector<double> rewards;
  batch.entropies.clear();
  for (const auto& t : batch.trajectories) {
    rewards.push_back(t.reward.total);
    batch.entropies.push_back(mean_key_entropy(old, vocab, summary, t.tokens, t.key_positions));
  }
  batch.advantages = group_advantage(rewards);
  batch.clip_bounds = adaptive ? adaptive_clip_bounds(batch.entropies, clip)
                               : std::vector<double>(batch.trajectories.size(), clip.eps_low);
}

std::vector<std::vector<double>> importance_ratios(const PolicyParameters& params, const ActionVocab& vocab,
                                                   const RecordSummary& summary, const GroupBatch& batch) {
  std::vector<std::vector<double>> out;
  out.reserve(batch.trajectories.size());
  for (const auto& t : batch.trajectories) {
    const LogProb lp = trajectory_logprob(params, vocab, summary, t.tokens);
    std::vector<double> r(t.tokens.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
      r[k] = std::exp(lp.per_token[k] - t.logp_old[k]);
      if (!std::isfinite(r[k])) throw NumericError("importance ratio is not finite");
    }
    out.push_back(std::move(r));
  }
  return out;
}

Surrogate surrogate_objective(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                              const GroupBatch& batch, double eps_low, bool with_grad) {
  const int g = batch.size();
  if (static_cast<int>(batch.advantages.size()) != g || static_cast<int>(batch.clip_bounds.size()) != g)
    throw ArgumentError("surrogate_objective: batch is not prepared");
  const auto ratios = importance_ratios(params, vocab, summary, batch);
  Surrogate out;
  if (with_grad) out.grad.assign(params.values.size(), 0.0);
  std::vector<double> weights;
  for (int i = 0; i < g; ++i) {
    const auto& t = batch.trajectories[i];
    const double a = batch.advantages[i];
    const double scale = 1.0 / (static_cast<double>(g) * static_cast<double>(t.tokens.size()));
    weights.assign(t.tokens.size(), 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < t.tokens.size(); ++k) {
      const double r = ratios[i][k];
      const double unclipped = r * a;
      const double clipped = clip_fn(r, eps_low, batch.clip_bounds[i]) * a;
      if (clipped < unclipped) {
        sum += clipped;
      } else {
        sum += unclipped;
        // d(r)/dtheta = r * d log p / dtheta
        weights[k] = scale * a * r;
      }
    }
    out.value += scale * sum;
    if (with_grad) accumulate_logprob_grad(params, vocab, summary, t.tokens, weights, out.grad);
  }
  if (!std::isfinite(out.value)) throw NumericError("surrogate objective is not finite");
  return out;
}

Stage2Result run_stage2(const ActionVocab& vocab, std::span<const PatientContext> patients,
                        const PolicyParameters& init, const RlConfig& cfg, const HeldoutEval& heldout) {
  validate(cfg);
  if (patients.empty()) throw StageError("stage 2: no training patients");
  Stage2Result result{init, {}};
  PolicyParameters& params = result.params;
  std::vector<double> m, v;
  if (cfg.use_adam) {
    m.assign(params.values.size(), 0.0);
    v.assign(params.values.size(), 0.0);
  }
  long adam_t = 0;
  const int per_iter = std::min<int>(cfg.groups_per_iteration, static_cast<int>(patients.size()));
  std::vector<int> order(patients.size());

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::uint64_t it_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(it));
    Rng pick(it_seed);
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, pick);

    const PolicyParameters old = params;
    std::vector<GroupBatch> batches(per_iter);
    parallel_for(per_iter, cfg.workers, [&](std::size_t j) {
      const PatientContext& p = patients[order[j]];
      Rng rng(derive_seed(it_seed, static_cast<std::uint64_t>(j)));
      batches[j] = sample_group(old, vocab, p, cfg.group_size, cfg.reward, rng);
      batches[j].patient = order[j];
      prepare_batch(batches[j], old, vocab, p.summary, cfg.clip, cfg.adaptive_clip);
    });

    RlIterationLog row;
    row.iteration = it;
    row.min_eps = cfg.clip.eps_max;
    row.max_eps = cfg.clip.eps_min;
    int count = 0;
    for (const auto& b : batches) {
      for (int i = 0; i < b.size(); ++i) {
        row.mean_r += b.trajectories[i].reward.total;
        row.mean_r_cls += b.trajectories[i].reward.r_cls;
        row.mean_r_att += b.trajectories[i].reward.r_att;
        row.mean_h += b.entropies[i];
        row.min_eps = std::min(row.min_eps, b.clip_bounds[i]);
        row.max_eps = std::max(row.max_eps, b.clip_bounds[i]);
        ++count;
      }
    }
    row.mean_r /= count;
    row.mean_r_cls /= count;
    row.mean_r_att /= count;
    row.mean_h /= count;

    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      for (const auto& b : batches) {
        if (std::all_of(b.advantages.begin(), b.advantages.end(), [](double a) { return a == 0.0; })) continue;
        const Surrogate s =
            surrogate_objective(params, vocab, patients[b.patient].summary, b, cfg.clip.eps_low, true);
        if (cfg.use_adam) {
          ++adam_t;
          const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
          const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
          for (std::size_t k = 0; k < s.grad.size(); ++k) {
            m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * s.grad[k];
            v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * s.grad[k] * s.grad[k];
            params.values[k] += cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
          }
        } else {
          for (std::size_t k = 0; k < s.grad.size(); ++k) params.values[k] += cfg.lr * s.grad[k];
        }
      }
    }

    if (heldout && cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0) row.heldout_auroc = heldout(params);
    result.log.push_back(row);
  }
  return result;
}

void write_rl_log_csv(const std::string& path, std::span<const RlIterationLog> log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.precision(17);
  out << "iteration,mean_R,mean_R_cls,mean_R_att,mean_H,min_eps,max_eps,heldout_auroc\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << r.mean_r << ',' << r.mean_r_cls << ',' << r.mean_r_att << ',' << r.mean_h << ','
        << r.min_eps << ',' << r.max_eps << ',';
    if (r.heldout_auroc) out << *r.heldout_auroc;
    out << '\n';
  }
}

}  // namespace eagrl
