#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eagrl/rewards.hpp"
#include "eagrl/synth_ehr.hpp"

namespace eagrl {

enum class TokenKind { kAsk, kFinalize, kDeclare, kPredict };

/// Discrete action vocabulary of the reasoning universe.
///
/// Layout (F features): ASK(f) = f, FINALIZE = F, DECLARE(f) = F + 1 + f,
/// PREDICT(b) = 2F + 1 + b for ten probability buckets b; |V| = 2F + 11.
/// The vocabulary also carries the trajectory rules: K declarations and at
/// most `max_asks` subquestions before the final answer.
class ActionVocab {
 public:
  static constexpr int kBuckets = 10;

  ActionVocab(std::vector<std::string> features, int k_declare = 5, int max_asks = 7);

  int n_features() const { return static_cast<int>(features_.size()); }
  int k() const { return k_declare_; }
  int max_asks() const { return max_asks_; }
  int size() const { return 2 * n_features() + 1 + kBuckets; }

  int ask(int f) const;
  int finalize() const { return n_features(); }
  int declare(int f) const;
  int predict(int bucket) const;

  TokenKind kind(int token) const;
  int feature_of(int token) const;  // ASK or DECLARE tokens
  int bucket_of(int token) const;   // PREDICT tokens

  static double bucket_value(int bucket) { return 0.05 + 0.1 * bucket; }

  const std::vector<std::string>& features() const { return features_; }
  int feature_index(const std::string& name) const;  // throws VocabularyError
  std::string token_name(int token) const;

  // Stable fingerprint of (features, K, max_asks); checkpoints refuse to load
  // against a different vocabulary.
  std::string hash() const;

 private:
  std::vector<std::string> features_;
  int k_declare_;
  int max_asks_;
};

enum class Phase { kAsking, kDeclaring, kPredicting, kDone };

// Prefix state of a trajectory. Everything the policy conditions on beyond the
// record itself lives here.
struct DecodeState {
  explicit DecodeState(int n_features) : asked(n_features, 0), declared(n_features, 0) {}

  Phase phase = Phase::kAsking;
  std::vector<std::uint8_t> asked;
  std::vector<std::uint8_t> declared;
  int n_asked = 0;
  int n_declared = 0;
  int bucket = -1;
};

// Legality rules:
//   asking     ASK(f) for features not yet asked while fewer than max_asks
//              were asked; FINALIZE once at least K features were asked
//              (forced when max_asks is reached).
//   declaring  DECLARE(f) for asked, not yet declared features.
//   predicting any PREDICT(b).
bool is_legal(const ActionVocab& vocab, const DecodeState& state, int token);
std::vector<int> legal_tokens(const ActionVocab& vocab, const DecodeState& state);

// Applies a token; throws ConsistencyError when it is illegal in `state`.
void advance(const ActionVocab& vocab, DecodeState& state, int token);
DecodeState replay(const ActionVocab& vocab, std::span<const int> tokens);

enum class Direction { kIncreasing, kDecreasing, kFlat };
const char* to_string(Direction d);

struct AnswerPayload {
  int feature = -1;
  double last_value = 0.0;
  double delta = 0.0;    // last minus first visit
  double z_score = 0.0;  // last value against the reference feature statistics
  Direction direction = Direction::kFlat;
};

// Deterministic answer to ASK(f) on an imputed record.
AnswerPayload answer_subquestion(const ActionVocab& vocab, const PatientRecord& record, const FeatureStats& stats,
                                 int ask_token);

// Everything the environment and the policy read from a record, keyed by
// canonical feature index. Built once per record.
struct RecordSummary {
  std::vector<AnswerPayload> answers;
  std::vector<double> observed_fraction;
};

RecordSummary summarize(const ActionVocab& vocab, const PatientRecord& record, const FeatureStats& stats);

struct FinalAnswer {
  double prediction = 0.5;
  int bucket = -1;
  std::vector<int> declared;  // sorted feature indices
};

// Structural decode: ASK* FINALIZE DECLARE{K distinct} PREDICT. Throws
// DecodeError naming the first violation.
FinalAnswer decode_final(const ActionVocab& vocab, std::span<const int> tokens);

struct Step {
  int question = -1;  // ASK(f) or FINALIZE
  std::optional<AnswerPayload> answer;
  bool terminal = false;
};

struct Trajectory {
  std::vector<int> token_ids;
  std::vector<Step> steps;
  std::vector<int> declared;
  double prediction = 0.5;
  std::vector<int> key_positions;  // indices of the DECLARE tokens

  int asks() const { return static_cast<int>(steps.size()) - 1; }
};

// Validates structure and legality, then attaches answers.
Trajectory build_trajectory(const ActionVocab& vocab, const RecordSummary& summary, std::span<const int> tokens);

// Local usefulness of a candidate subquestion given the prefix, in [1, 100].
// ASK(f): 50, +30 if f is in the hint and new, -40 if already asked, +10 if
// |z| > 1. FINALIZE: 50 + 10 * (fraction of the hint already asked).
double local_usefulness(const ActionVocab& vocab, const DecodeState& prefix, int candidate,
                        std::span<const int> salient_hint, const RecordSummary& summary);

struct TrajectoryRecord {
  std::string patient_id;
  int label = 0;
  std::vector<int> token_ids;
  RewardBreakdown reward;
};

std::string trajectory_json_line(const ActionVocab& vocab, const RecordSummary& summary,
                                 const TrajectoryRecord& record);
void write_trajectories_jsonl(const std::string& path, const ActionVocab& vocab,
                              std::span<const RecordSummary* const> summaries,
                              std::span<const TrajectoryRecord> records);
std::vector<TrajectoryRecord> read_trajectories_jsonl(const std::string& path);

}  // namespace eagrl
