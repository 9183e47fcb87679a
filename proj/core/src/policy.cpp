#include "eagrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "eagrl/error.hpp"
#include "eagrl/parallel.hpp"
#include "json.hpp"

namespace eagrl {
namespace {

constexpr double kZClip = 4.0;

struct Forward {
  std::vector<double> x;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> probs;
  int legal_count = 0;
};

void forward(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
             const DecodeState& state, Forward& out) {
  const PolicyShape& s = params.shape;
  if (s.vocab_size != vocab.size() || s.input_dim != policy_input_dim(vocab.n_features()))
    throw ShapeError("policy shape does not match the vocabulary");
  const double* w = params.values.data();
  out.x = encode_state(vocab, summary, state);
  const int d = s.input_dim;
  const int h = s.hidden_dim;
  out.h1.assign(h, 0.0);
  for (int i = 0; i < h; ++i) {
    const double* row = w + s.w1() + static_cast<std::size_t>(i) * d;
    double acc = w[s.b1() + i];
    for (int j = 0; j < d; ++j) acc += row[j] * out.x[j];
    out.h1[i] = std::tanh(acc);
  }
  out.h2.assign(h, 0.0);
  for (int i = 0; i < h; ++i) {
    const double* row = w + s.w2() + static_cast<std::size_t>(i) * h;
    double acc = w[s.b2() + i];
    for (int j = 0; j < h; ++j) acc += row[j] * out.h1[j];
    out.h2[i] = std::tanh(acc);
  }
  out.probs.assign(s.vocab_size, 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  std::vector<int> legal;
  legal.reserve(s.vocab_size);
  for (int v = 0; v < s.vocab_size; ++v) {
    if (!is_legal(vocab, state, v)) continue;
    legal.push_back(v);
    const double* row = w + s.wo() + static_cast<std::size_t>(v) * h;
    double acc = w[s.bo() + v];
    for (int j = 0; j < h; ++j) acc += row[j] * out.h2[j];
    if (!std::isfinite(acc)) throw NumericError("policy produced a non-finite logit");
    out.probs[v] = acc;
    max_logit = std::max(max_logit, acc);
  }
  if (legal.empty()) throw ConsistencyError("no legal token in the current state");
  double z = 0.0;
  for (int v : legal) {
    out.probs[v] = std::exp(out.probs[v] - max_logit);
    z += out.probs[v];
  }
  for (int v : legal) out.probs[v] /= z;
  out.legal_count = static_cast<int>(legal.size());
}

int argmax_lowest(std::span<const double> probs) {
  int best = 0;
  for (int v = 1; v < static_cast<int>(probs.size()); ++v)
    if (probs[v] > probs[best]) best = v;
  return best;
}

// Adds weight * d log p(token) / d params for one forward pass.
void backward(const PolicyParameters& params, const Forward& fw, int token, double weight, std::span<double> grad) {
  if (weight == 0.0 || fw.legal_count == 1) return;
  const PolicyShape& s = params.shape;
  const double* w = params.values.data();
  const int d = s.input_dim;
  const int h = s.hidden_dim;
  std::vector<double> dh2(h, 0.0);
  for (int v = 0; v < s.vocab_size; ++v) {
    const double g = weight * ((v == token ? 1.0 : 0.0) - fw.probs[v]);
    if (g == 0.0) continue;
    double* grow = grad.data() + s.wo() + static_cast<std::size_t>(v) * h;
    const double* wrow = w + s.wo() + static_cast<std::size_t>(v) * h;
    for (int j = 0; j < h; ++j) {
      grow[j] += g * fw.h2[j];
      dh2[j] += g * wrow[j];
    }
    grad[s.bo() + v] += g;
  }
  std::vector<double> dh1(h, 0.0);
  for (int i = 0; i < h; ++i) {
    const double dz = dh2[i] * (1.0 - fw.h2[i] * fw.h2[i]);
    if (dz == 0.0) continue;
    double* grow = grad.data() + s.w2() + static_cast<std::size_t>(i) * h;
    const double* wrow = w + s.w2() + static_cast<std::size_t>(i) * h;
    for (int j = 0; j < h; ++j) {
      grow[j] += dz * fw.h1[j];
      dh1[j] += dz * wrow[j];
    }
    grad[s.b2() + i] += dz;
  }
  for (int i = 0; i < h; ++i) {
    const double dz = dh1[i] * (1.0 - fw.h1[i] * fw.h1[i]);
    if (dz == 0.0) continue;
    double* grow = grad.data() + s.w1() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j)
      if (fw.x[j] != 0.0) grow[j] += dz * fw.x[j];
    grad[s.b1() + i] += dz;
  }
}

PolicyParameters empty_policy(const ActionVocab& vocab, int hidden_dim) {
  if (hidden_dim < 1) throw ConfigError("policy.hidden_dim must be >= 1");
  PolicyParameters p;
  p.shape = {policy_input_dim(vocab.n_features()), hidden_dim, vocab.size()};
  p.values.assign(p.shape.size(), 0.0);
  p.vocab_hash = vocab.hash();
  p.features = vocab.features();
  return p;
}

}  // namespace

int policy_input_dim(int n_features) { return 5 * n_features + 3; }

PolicyParameters zero_policy(const ActionVocab& vocab, int hidden_dim) { return empty_policy(vocab, hidden_dim); }

PolicyParameters init_policy(const ActionVocab& vocab, int hidden_dim, std::uint64_t seed) {
  PolicyParameters p = empty_policy(vocab, hidden_dim);
  p.seed = seed;
  Rng rng(seed);
  const PolicyShape& s = p.shape;
  const double scale1 = 1.0 / std::sqrt(static_cast<double>(s.input_dim));
  const double scale2 = 1.0 / std::sqrt(static_cast<double>(s.hidden_dim));
  for (std::size_t i = s.w1(); i < s.b1(); ++i) p.values[i] = scale1 * standard_normal(rng);
  for (std::size_t i = s.w2(); i < s.b2(); ++i) p.values[i] = scale2 * standard_normal(rng);
  return p;
}

std::vector<double> encode_state(const ActionVocab& vocab, const RecordSummary& summary, const DecodeState& state) {
  const int f_count = vocab.n_features();
  std::vector<double> x(static_cast<std::size_t>(policy_input_dim(f_count)), 0.0);
  // The prediction is made from the declared evidence only.
  const bool predicting = state.phase == Phase::kPredicting;
  for (int f = 0; f < f_count; ++f) {
    if (predicting ? state.declared[f] : state.asked[f]) {
      const AnswerPayload& a = summary.answers[f];
      x[3 * f] = summary.observed_fraction[f];
      x[3 * f + 1] = std::clamp(a.z_score, -kZClip, kZClip);
      x[3 * f + 2] = a.direction == Direction::kIncreasing ? 1.0 : (a.direction == Direction::kDecreasing ? -1.0 : 0.0);
    }
    if (state.asked[f]) x[3 * f_count + f] = 1.0;
    if (state.declared[f]) x[4 * f_count + f] = 1.0;
  }
  const int phase = state.phase == Phase::kAsking ? 0 : (state.phase == Phase::kDeclaring ? 1 : 2);
  x[5 * f_count + phase] = 1.0;
  return x;
}

std::vector<double> step_distribution(const PolicyParameters& params, const ActionVocab& vocab,
                                      const RecordSummary& summary, const DecodeState& state) {
  Forward fw;
  forward(params, vocab, summary, state, fw);
  return fw.probs;
}

double token_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double token_entropy(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                     const DecodeState& state) {
  return token_entropy(step_distribution(params, vocab, summary, state));
}

std::vector<int> complete_tokens(const PolicyParameters& params, const ActionVocab& vocab,
                                 const RecordSummary& summary, std::span<const int> prefix, Rng* rng) {
  std::vector<int> tokens(prefix.begin(), prefix.end());
  DecodeState state = replay(vocab, tokens);
  Forward fw;
  while (state.phase != Phase::kDone) {
    forward(params, vocab, summary, state, fw);
    const int token = rng ? sample_index(fw.probs, *rng) : argmax_lowest(fw.probs);
    advance(vocab, state, token);
    tokens.push_back(token);
  }
  return tokens;
}

std::vector<int> sample_tokens(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                               Rng& rng) {
  return complete_tokens(params, vocab, summary, {}, &rng);
}

Trajectory sample_trajectory(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                             Rng& rng) {
  return build_trajectory(vocab, summary, sample_tokens(params, vocab, summary, rng));
}

std::vector<int> greedy_tokens(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary) {
  return complete_tokens(params, vocab, summary, {}, nullptr);
}

LogProb trajectory_logprob(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                           std::span<const int> tokens) {
  DecodeState state(vocab.n_features());
  Forward fw;
  LogProb out;
  out.per_token.reserve(tokens.size());
  for (int token : tokens) {
    if (!is_legal(vocab, state, token))
      throw ConsistencyError("trajectory_logprob: token " + std::to_string(token) + " is illegal in its state");
    forward(params, vocab, summary, state, fw);
    const double lp = fw.legal_count == 1 ? 0.0 : std::log(fw.probs[token]);
    out.per_token.push_back(lp);
    out.total += lp;
    advance(vocab, state, token);
  }
  return out;
}

void accumulate_logprob_grad(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                             std::span<const int> tokens, std::span<const double> weights, std::span<double> grad) {
  if (weights.size() != tokens.size()) throw ShapeError("accumulate_logprob_grad: one weight per token required");
  if (grad.size() != params.values.size()) throw ShapeError("accumulate_logprob_grad: gradient size mismatch");
  DecodeState state(vocab.n_features());
  Forward fw;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!is_legal(vocab, state, tokens[t]))
      throw ConsistencyError("grad_logprob: token " + std::to_string(tokens[t]) + " is illegal in its state");
    if (weights[t] != 0.0) {
      forward(params, vocab, summary, state, fw);
      backward(params, fw, tokens[t], weights[t], grad);
    }
    advance(vocab, state, tokens[t]);
  }
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("grad_logprob: non-finite gradient");
}

std::vector<double> grad_logprob(const PolicyParameters& params, const ActionVocab& vocab,
                                 const RecordSummary& summary, std::span<const int> tokens) {
  std::vector<double> grad(params.values.size(), 0.0);
  const std::vector<double> ones(tokens.size(), 1.0);
  accumulate_logprob_grad(params, vocab, summary, tokens, ones, grad);
  return grad;
}

double policy_score(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                    ScoreMode mode) {
  DecodeState state(vocab.n_features());
  Forward fw;
  while (true) {
    forward(params, vocab, summary, state, fw);
    if (state.phase == Phase::kPredicting) break;
    advance(vocab, state, argmax_lowest(fw.probs));
  }
  if (mode == ScoreMode::kGreedyBucket) return ActionVocab::bucket_value(vocab.bucket_of(argmax_lowest(fw.probs)));
  double expected = 0.0;
  for (int b = 0; b < ActionVocab::kBuckets; ++b) expected += fw.probs[vocab.predict(b)] * ActionVocab::bucket_value(b);
  return expected;
}

double mean_logprob(const PolicyParameters& params, const ActionVocab& vocab, std::span<const SftExample> data) {
  if (data.empty()) throw TrainingError("mean_logprob: empty dataset");
  double total = 0.0;
  for (const auto& ex : data) total += trajectory_logprob(params, vocab, *ex.summary, ex.tokens).total;
  return total / static_cast<double>(data.size());
}

SftResult sft_fit(const PolicyParameters& init, const ActionVocab& vocab, std::span<const SftExample> data, double lr,
                  int epochs, int workers) {
  if (data.empty()) throw TrainingError("sft_fit: empty dataset");
  for (const auto& ex : data) decode_final(vocab, ex.tokens);
  SftResult result{init, {}};
  PolicyParameters& params = result.params;
  const std::size_t n_params = params.values.size();
  const double inv_n = 1.0 / static_cast<double>(data.size());

  // Chunked accumulation; partial sums are combined in chunk order so the
  // result does not depend on the worker count.
  const std::size_t chunks = std::min<std::size_t>(data.size(), 16);
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(n_params, 0.0));
  std::vector<double> partial_loss(chunks, 0.0);

  for (int epoch = 0; epoch <= epochs; ++epoch) {
    parallel_for(chunks, workers, [&](std::size_t c) {
      std::fill(partial[c].begin(), partial[c].end(), 0.0);
      partial_loss[c] = 0.0;
      for (std::size_t i = c; i < data.size(); i += chunks) {
        const auto& ex = data[i];
        partial_loss[c] -= trajectory_logprob(params, vocab, *ex.summary, ex.tokens).total;
        if (epoch < epochs) {
          const std::vector<double> ones(ex.tokens.size(), 1.0);
          accumulate_logprob_grad(params, vocab, *ex.summary, ex.tokens, ones, partial[c]);
        }
      }
    });
    double loss = 0.0;
    for (double l : partial_loss) loss += l;
    loss *= inv_n;
    if (!std::isfinite(loss)) throw TrainingError("sft_fit: non-finite loss");
    result.loss_history.push_back(loss);
    if (epoch == epochs) break;
    // Descent on the negative log-likelihood is ascent on the log-likelihood.
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t k = 0; k < n_params; ++k) params.values[k] += lr * inv_n * partial[c][k];
  }
  return result;
}

void save_policy(const std::string& path, const PolicyParameters& params) {
  nlohmann::ordered_json j;
  j["kind"] = "policy";
  j["vocab_hash"] = params.vocab_hash;
  j["features"] = params.features;
  j["seed"] = params.seed;
  j["input_dim"] = params.shape.input_dim;
  j["hidden_dim"] = params.shape.hidden_dim;
  j["vocab_size"] = params.shape.vocab_size;
  j["values"] = params.values;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

PolicyParameters load_policy(const std::string& path, const ActionVocab& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const auto j = nlohmann::json::parse(in);
  if (j.at("kind").get<std::string>() != "policy") throw IoError(path + " is not a policy checkpoint");
  PolicyParameters p;
  p.vocab_hash = j.at("vocab_hash").get<std::string>();
  if (p.vocab_hash != vocab.hash())
    throw ConsistencyError("policy checkpoint vocabulary hash " + p.vocab_hash + " does not match " + vocab.hash());
  p.features = j.at("features").get<std::vector<std::string>>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.shape = {j.at("input_dim").get<int>(), j.at("hidden_dim").get<int>(), j.at("vocab_size").get<int>()};
  p.values = j.at("values").get<std::vector<double>>();
  if (p.values.size() != p.shape.size()) throw ShapeError(path + ": parameter count does not match its shape");
  return p;
}

}  // namespace eagrl
