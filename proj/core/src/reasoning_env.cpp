#include "eagrl/reasoning_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "eagrl/error.hpp"
#include "json.hpp"

namespace eagrl {

ActionVocab::ActionVocab(std::vector<std::string> features, int k_declare, int max_asks)
    : features_(std::move(features)), k_declare_(k_declare), max_asks_(max_asks) {
  if (features_.empty()) throw VocabularyError("ActionVocab: no features");
  if (!std::is_sorted(features_.begin(), features_.end()) ||
      std::adjacent_find(features_.begin(), features_.end()) != features_.end())
    throw VocabularyError("ActionVocab: feature names must be sorted and distinct");
  if (k_declare_ < 1 || k_declare_ > n_features()) throw VocabularyError("ActionVocab: K must lie in [1, F]");
  if (max_asks_ < k_declare_ || max_asks_ > n_features())
    throw VocabularyError("ActionVocab: max_asks must lie in [K, F]");
}

int ActionVocab::ask(int f) const {
  if (f < 0 || f >= n_features()) throw VocabularyError("ASK: feature index out of range");
  return f;
}

int ActionVocab::declare(int f) const {
  if (f < 0 || f >= n_features()) throw VocabularyError("DECLARE: feature index out of range");
  return n_features() + 1 + f;
}

int ActionVocab::predict(int bucket) const {
  if (bucket < 0 || bucket >= kBuckets) throw VocabularyError("PREDICT: bucket out of range");
  return 2 * n_features() + 1 + bucket;
}

TokenKind ActionVocab::kind(int token) const {
  const int f = n_features();
  if (token < 0 || token >= size()) throw VocabularyError("token id " + std::to_string(token) + " outside vocabulary");
  if (token < f) return TokenKind::kAsk;
  if (token == f) return TokenKind::kFinalize;
  if (token <= 2 * f) return TokenKind::kDeclare;
  return TokenKind::kPredict;
}

int ActionVocab::feature_of(int token) const {
  switch (kind(token)) {
    case TokenKind::kAsk:
      return token;
    case TokenKind::kDeclare:
      return token - n_features() - 1;
    default:
      throw VocabularyError("token " + std::to_string(token) + " carries no feature");
  }
}

int ActionVocab::bucket_of(int token) const {
  if (kind(token) != TokenKind::kPredict) throw VocabularyError("token " + std::to_string(token) + " is not PREDICT");
  return token - 2 * n_features() - 1;
}

int ActionVocab::feature_index(const std::string& name) const {
  const auto it = std::lower_bound(features_.begin(), features_.end(), name);
  if (it == features_.end() || *it != name) throw VocabularyError("unknown feature '" + name + "'");
  return static_cast<int>(it - features_.begin());
}

std::string ActionVocab::token_name(int token) const {
  switch (kind(token)) {
    case TokenKind::kAsk:
      return "ASK(" + features_[feature_of(token)] + ")";
    case TokenKind::kFinalize:
      return "FINALIZE";
    case TokenKind::kDeclare:
      return "DECLARE(" + features_[feature_of(token)] + ")";
    case TokenKind::kPredict:
      return "PREDICT(" + std::to_string(bucket_of(token)) + ")";
  }
  return {};
}

std::string ActionVocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& name : features_) mix(name);
  mix(std::to_string(k_declare_));
  mix(std::to_string(max_asks_));
  mix(std::to_string(kBuckets));
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool is_legal(const ActionVocab& vocab, const DecodeState& state, int token) {
  if (token < 0 || token >= vocab.size()) return false;
  switch (state.phase) {
    case Phase::kAsking:
      if (vocab.kind(token) == TokenKind::kAsk) return !state.asked[token] && state.n_asked < vocab.max_asks();
      return token == vocab.finalize() && state.n_asked >= vocab.k();
    case Phase::kDeclaring:
      if (vocab.kind(token) != TokenKind::kDeclare) return false;
      {
        const int f = vocab.feature_of(token);
        return state.asked[f] && !state.declared[f];
      }
    case Phase::kPredicting:
      return vocab.kind(token) == TokenKind::kPredict;
    case Phase::kDone:
      return false;
  }
  return false;
}

std::vector<int> legal_tokens(const ActionVocab& vocab, const DecodeState& state) {
  std::vector<int> out;
  for (int t = 0; t < vocab.size(); ++t)
    if (is_legal(vocab, state, t)) out.push_back(t);
  return out;
}

void advance(const ActionVocab& vocab, DecodeState& state, int token) {
  if (!is_legal(vocab, state, token))
    throw ConsistencyError("token " + std::to_string(token) + " is illegal in the current state");
  switch (vocab.kind(token)) {
    case TokenKind::kAsk:
      state.asked[token] = 1;
      ++state.n_asked;
      break;
    case TokenKind::kFinalize:
      state.phase = Phase::kDeclaring;
      break;
    case TokenKind::kDeclare:
      state.declared[vocab.feature_of(token)] = 1;
      if (++state.n_declared == vocab.k()) state.phase = Phase::kPredicting;
      break;
    case TokenKind::kPredict:
      state.bucket = vocab.bucket_of(token);
      state.phase = Phase::kDone;
      break;
  }
}

DecodeState replay(const ActionVocab& vocab, std::span<const int> tokens) {
  DecodeState state(vocab.n_features());
  for (int t : tokens) advance(vocab, state, t);
  return state;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::kIncreasing:
      return "increasing";
    case Direction::kDecreasing:
      return "decreasing";
    case Direction::kFlat:
      return "flat";
  }
  return "flat";
}

AnswerPayload answer_subquestion(const ActionVocab& vocab, const PatientRecord& record, const FeatureStats& stats,
                                 int ask_token) {
  if (vocab.kind(ask_token) != TokenKind::kAsk) throw VocabularyError("answer_subquestion: not an ASK token");
  const int f = vocab.feature_of(ask_token);
  if (record.n_features() != vocab.n_features()) throw ShapeError("answer_subquestion: record feature count mismatch");
  const auto& first = record.visits.front()[f];
  const auto& last = record.visits.back()[f];
  if (!first || !last) throw ImputationError("answer_subquestion: record must be imputed");
  AnswerPayload a;
  a.feature = f;
  a.last_value = *last;
  a.delta = *last - *first;
  a.z_score = (*last - stats.mean[f]) / stats.stddev[f];
  a.direction = a.delta > 0.0 ? Direction::kIncreasing : (a.delta < 0.0 ? Direction::kDecreasing : Direction::kFlat);
  return a;
}

RecordSummary summarize(const ActionVocab& vocab, const PatientRecord& record, const FeatureStats& stats) {
  RecordSummary s;
  s.answers.reserve(vocab.n_features());
  for (int f = 0; f < vocab.n_features(); ++f) s.answers.push_back(answer_subquestion(vocab, record, stats, vocab.ask(f)));
  s.observed_fraction = observed_fractions(record);
  return s;
}

FinalAnswer decode_final(const ActionVocab& vocab, std::span<const int> tokens) {
  auto fail = [](std::size_t pos, const std::string& what) {
    throw DecodeError("position " + std::to_string(pos) + ": " + what);
  };
  std::size_t pos = 0;
  while (pos < tokens.size() && vocab.kind(tokens[pos]) == TokenKind::kAsk) ++pos;
  if (pos == tokens.size() || tokens[pos] != vocab.finalize()) fail(pos, "missing FINALIZE");
  ++pos;
  FinalAnswer out;
  std::vector<std::uint8_t> seen(vocab.n_features(), 0);
  for (int i = 0; i < vocab.k(); ++i, ++pos) {
    if (pos == tokens.size()) fail(pos, "expected DECLARE, sequence ended");
    const TokenKind kind = vocab.kind(tokens[pos]);
    if (kind == TokenKind::kFinalize) fail(pos, "duplicate FINALIZE");
    if (kind != TokenKind::kDeclare) fail(pos, "expected DECLARE");
    const int f = vocab.feature_of(tokens[pos]);
    if (seen[f]) fail(pos, "duplicate DECLARE(" + vocab.features()[f] + ")");
    seen[f] = 1;
    out.declared.push_back(f);
  }
  if (pos == tokens.size()) fail(pos, "missing PREDICT");
  if (vocab.kind(tokens[pos]) != TokenKind::kPredict) fail(pos, "expected PREDICT");
  out.bucket = vocab.bucket_of(tokens[pos]);
  out.prediction = ActionVocab::bucket_value(out.bucket);
  if (pos + 1 != tokens.size()) fail(pos + 1, "tokens after PREDICT");
  std::sort(out.declared.begin(), out.declared.end());
  return out;
}

Trajectory build_trajectory(const ActionVocab& vocab, const RecordSummary& summary, std::span<const int> tokens) {
  const FinalAnswer final = decode_final(vocab, tokens);
  replay(vocab, tokens);
  Trajectory traj;
  traj.token_ids.assign(tokens.begin(), tokens.end());
  traj.declared = final.declared;
  traj.prediction = final.prediction;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenKind kind = vocab.kind(tokens[i]);
    if (kind == TokenKind::kAsk) {
      traj.steps.push_back({tokens[i], summary.answers[tokens[i]], false});
    } else if (kind == TokenKind::kFinalize) {
      traj.steps.push_back({tokens[i], std::nullopt, true});
    } else if (kind == TokenKind::kDeclare) {
      traj.key_positions.push_back(static_cast<int>(i));
    }
  }
  return traj;
}

double local_usefulness(const ActionVocab& vocab, const DecodeState& prefix, int candidate,
                        std::span<const int> salient_hint, const RecordSummary& summary) {
  const TokenKind kind = vocab.kind(candidate);
  auto in_hint = [&](int f) { return std::find(salient_hint.begin(), salient_hint.end(), f) != salient_hint.end(); };
  double score = 50.0;
  if (kind == TokenKind::kAsk) {
    const int f = vocab.feature_of(candidate);
    const bool repeat = prefix.asked[f] != 0;
    if (in_hint(f) && !repeat) score += 30.0;
    if (repeat) score -= 40.0;
    if (std::abs(summary.answers[f].z_score) > 1.0) score += 10.0;
  } else if (kind == TokenKind::kFinalize) {
    if (!salient_hint.empty()) {
      int covered = 0;
      for (int f : salient_hint) covered += prefix.asked[f] ? 1 : 0;
      score += 10.0 * static_cast<double>(covered) / static_cast<double>(salient_hint.size());
    }
  } else {
    throw ArgumentError("local_usefulness: candidate must be ASK or FINALIZE");
  }
  return std::clamp(score, 1.0, 100.0);
}

namespace {

nlohmann::ordered_json reward_json(const RewardBreakdown& r) {
  nlohmann::ordered_json j;
  j["r_cls"] = r.r_cls;
  j["r_att"] = r.r_att;
  j["total"] = r.total;
  j["margin_bonus"] = r.margin_bonus;
  return j;
}

}  // namespace

std::string trajectory_json_line(const ActionVocab& vocab, const RecordSummary& summary,
                                 const TrajectoryRecord& record) {
  const Trajectory traj = build_trajectory(vocab, summary, record.token_ids);
  nlohmann::ordered_json j;
  j["patient_id"] = record.patient_id;
  j["label"] = record.label;
  j["token_ids"] = traj.token_ids;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& step : traj.steps) {
    nlohmann::ordered_json s;
    s["q"] = vocab.token_name(step.question);
    nlohmann::ordered_json a;
    if (step.answer) {
      a["last"] = step.answer->last_value;
      a["delta"] = step.answer->delta;
      a["z"] = step.answer->z_score;
      a["direction"] = to_string(step.answer->direction);
    } else {
      a["prediction"] = traj.prediction;
      std::vector<std::string> names;
      for (int f : traj.declared) names.push_back(vocab.features()[f]);
      a["declared"] = names;
    }
    s["a"] = std::move(a);
    steps.push_back(std::move(s));
  }
  j["steps"] = std::move(steps);
  j["prediction"] = traj.prediction;
  std::vector<std::string> declared;
  for (int f : traj.declared) declared.push_back(vocab.features()[f]);
  j["declared_features"] = declared;
  j["reward_breakdown"] = reward_json(record.reward);
  return j.dump();
}

void write_trajectories_jsonl(const std::string& path, const ActionVocab& vocab,
                              std::span<const RecordSummary* const> summaries,
                              std::span<const TrajectoryRecord> records) {
  if (summaries.size() != records.size()) throw ShapeError("write_trajectories_jsonl: summary count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < records.size(); ++i) out << trajectory_json_line(vocab, *summaries[i], records[i]) << '\n';
}

std::vector<TrajectoryRecord> read_trajectories_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<TrajectoryRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TrajectoryRecord r;
    r.patient_id = j.at("patient_id").get<std::string>();
    r.label = j.at("label").get<int>();
    r.token_ids = j.at("token_ids").get<std::vector<int>>();
    const auto& rb = j.at("reward_breakdown");
    r.reward.r_cls = rb.at("r_cls").get<double>();
    r.reward.r_att = rb.at("r_att").get<double>();
    r.reward.total = rb.at("total").get<double>();
    r.reward.margin_bonus = rb.at("margin_bonus").get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace eagrl
