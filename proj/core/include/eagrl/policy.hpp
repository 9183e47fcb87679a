#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eagrl/reasoning_env.hpp"
#include "eagrl/rng.hpp"

namespace eagrl {

// Flat-parameter layout of the two-layer tanh encoder with a linear head:
//   h1 = tanh(W1 x + b1), h2 = tanh(W2 h1 + b2), logits = Wo h2 + bo.
struct PolicyShape {
  int input_dim = 0;
  int hidden_dim = 0;
  int vocab_size = 0;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(hidden_dim) * input_dim; }
  std::size_t w2() const { return b1() + hidden_dim; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden_dim) * hidden_dim; }
  std::size_t wo() const { return b2() + hidden_dim; }
  std::size_t bo() const { return wo() + static_cast<std::size_t>(vocab_size) * hidden_dim; }
  std::size_t size() const { return bo() + vocab_size; }
};

int policy_input_dim(int n_features);

struct PolicyParameters {
  PolicyShape shape;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string vocab_hash;
  std::vector<std::string> features;
};

// Hidden layers get scaled Gaussian weights; the output head starts at zero so
// the untrained policy is uniform over legal tokens.
PolicyParameters init_policy(const ActionVocab& vocab, int hidden_dim, std::uint64_t seed);
PolicyParameters zero_policy(const ActionVocab& vocab, int hidden_dim);

// Input vector: per feature (observed fraction, clipped z-score, trend sign),
// zeroed for features not yet asked (not declared, once predicting); asked
// mask; declared mask; phase one-hot.
// Built from canonical feature indices only, never serialization order.
std::vector<double> encode_state(const ActionVocab& vocab, const RecordSummary& summary, const DecodeState& state);

// Masked softmax over legal tokens; illegal tokens get exactly 0.
std::vector<double> step_distribution(const PolicyParameters& params, const ActionVocab& vocab,
                                      const RecordSummary& summary, const DecodeState& state);

// -sum p log p with 0 log 0 = 0.
double token_entropy(std::span<const double> probs);
double token_entropy(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                     const DecodeState& state);

std::vector<int> sample_tokens(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                               Rng& rng);
Trajectory sample_trajectory(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                             Rng& rng);

// Extends a prefix to a complete token sequence, sampling or taking the argmax
// (lowest id on ties) at every step.
std::vector<int> complete_tokens(const PolicyParameters& params, const ActionVocab& vocab,
                                 const RecordSummary& summary, std::span<const int> prefix, Rng* rng);
std::vector<int> greedy_tokens(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary);

struct LogProb {
  double total = 0.0;
  std::vector<double> per_token;
};

LogProb trajectory_logprob(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                           std::span<const int> tokens);

// grad += sum_t weights[t] * d log p(token_t | state_t) / d params.
void accumulate_logprob_grad(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                             std::span<const int> tokens, std::span<const double> weights, std::span<double> grad);

std::vector<double> grad_logprob(const PolicyParameters& params, const ActionVocab& vocab,
                                 const RecordSummary& summary, std::span<const int> tokens);

enum class ScoreMode {
  kGreedyBucket,    // bucket midpoint of the argmax PREDICT token
  kExpectedBucket,  // expected bucket midpoint at the greedy predicting state
};

// Evaluation-time prediction: greedy decoding of asks and declarations, then
// the final prediction read according to `mode`.
double policy_score(const PolicyParameters& params, const ActionVocab& vocab, const RecordSummary& summary,
                    ScoreMode mode);

struct SftExample {
  const RecordSummary* summary = nullptr;
  std::vector<int> tokens;
};

struct SftResult {
  PolicyParameters params;
  std::vector<double> loss_history;  // mean negative log-likelihood before each step, then final
};

// Full-batch gradient descent on the mean negative trajectory log-likelihood.
SftResult sft_fit(const PolicyParameters& init, const ActionVocab& vocab, std::span<const SftExample> data, double lr,
                  int epochs, int workers = 1);

double mean_logprob(const PolicyParameters& params, const ActionVocab& vocab, std::span<const SftExample> data);

void save_policy(const std::string& path, const PolicyParameters& params);
// Throws ConsistencyError when the checkpoint was written for another vocabulary.
PolicyParameters load_policy(const std::string& path, const ActionVocab& vocab);

}  // namespace eagrl
