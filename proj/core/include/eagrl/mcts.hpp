#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eagrl/expert.hpp"
#include "eagrl/policy.hpp"
#include "eagrl/reasoning_env.hpp"
#include "eagrl/rewards.hpp"
#include "eagrl/rng.hpp"

namespace eagrl {

struct SearchConfig {
  int n_rollouts = 8;      // N
  int max_depth = 7;       // T, maximum number of subquestions
  double uct_weight = 1.0; // lambda1
  int branching = 3;       // d
  int topk = 2;            // k
  RewardConfig reward;
};

void validate(const SearchConfig& cfg);

// Result of applying one candidate action to a prefix: the tokens it appends
// (one ASK, or FINALIZE plus the completed final answer), whether the child is
// terminal, and its local usefulness r(s, a).
struct Expansion {
  int action = -1;
  std::vector<int> appended;
  bool terminal = false;
  double local_reward = 0.0;
};

/// The search problem seen by the tree. The patient reasoning environment is
/// one implementation; tests plug in rigged ones.
class SearchDomain {
 public:
  virtual ~SearchDomain() = default;
  virtual bool is_terminal(std::span<const int> prefix) const = 0;
  // Up to `d` distinct candidate actions for a non-terminal prefix.
  virtual std::vector<int> propose(std::span<const int> prefix, int d, Rng& rng) const = 0;
  virtual Expansion apply(std::span<const int> prefix, int action, Rng& rng) const = 0;
  virtual RewardBreakdown evaluate(std::span<const int> terminal_tokens) const = 0;
};

struct SearchEdge {
  int action = -1;
  int child = -1;
  int visits = 0;       // N(s, a)
  double q = 0.0;       // running mean of returns through this edge
  double local_reward = 0.0;
};

struct SearchNode {
  std::vector<int> tokens;  // prefix
  int parent = -1;
  int action = -1;          // edge action from the parent
  int depth = 0;            // steps taken from the root
  bool terminal = false;
  int visits = 0;           // N(s)
  std::vector<SearchEdge> edges;
  std::optional<RewardBreakdown> reward;  // cached for terminal nodes
};

struct SearchTree {
  std::vector<SearchNode> nodes;  // nodes[0] is the root
};

// (node index, edge index) pairs from the root down.
using SearchPath = std::vector<std::pair<int, int>>;

double uct_score(double q, int parent_visits, int edge_visits, double uct_weight);

// argmax over edges of Q + lambda1 sqrt(ln N(s) / N(s,a)); unvisited edges
// first; ties to the smallest action id. Returns the edge index.
int uct_select(const SearchNode& node, double uct_weight);

// Adds up to d children to a non-terminal, unexpanded node. Returns the
// number added.
int expand(SearchTree& tree, int node, const SearchDomain& domain, int d, Rng& rng);

// Greedy usefulness rollout from `node`: expand when needed, follow the child
// with the highest local reward (smallest action id on ties), stop at a
// terminal node. Appends the traversed edges to `path`; returns the terminal
// node index.
int simulate(SearchTree& tree, int node, const SearchDomain& domain, int d, Rng& rng, SearchPath& path);

// Adds one visit with return R to every edge and node on the path, plus the
// leaf.
void backpropagate(SearchTree& tree, const SearchPath& path, int leaf, double ret);

struct TerminalTrajectory {
  std::vector<int> tokens;
  RewardBreakdown reward;
};

struct RolloutLog {
  SearchPath path;
  std::vector<int> expanded_actions;
  int leaf = -1;
  double ret = 0.0;
};

struct SearchResult {
  SearchTree tree;
  std::vector<TerminalTrajectory> terminals;  // distinct, first-encounter order
  std::vector<RolloutLog> rollouts;
};

SearchResult run_search(const SearchDomain& domain, const SearchConfig& cfg, Rng& rng);

// The k best terminals by total reward; ties go to the shorter token sequence,
// then to the lexicographically smaller one.
std::vector<TerminalTrajectory> extract_topk(std::span<const TerminalTrajectory> terminals, int k);

/// Patient reasoning environment as a search domain. Candidates are drawn
/// without replacement from the policy over legal tokens; FINALIZE children
/// are completed by sampling the declarations and prediction from the policy.
/// The salient hint for usefulness is the expert's top-K set.
class PatientSearchDomain : public SearchDomain {
 public:
  PatientSearchDomain(const PolicyParameters& policy, const ActionVocab& vocab, const RecordSummary& summary,
                      std::vector<int> expert_features, int label, const RewardConfig& reward);

  bool is_terminal(std::span<const int> prefix) const override;
  std::vector<int> propose(std::span<const int> prefix, int d, Rng& rng) const override;
  Expansion apply(std::span<const int> prefix, int action, Rng& rng) const override;
  RewardBreakdown evaluate(std::span<const int> terminal_tokens) const override;

  const std::vector<int>& expert_features() const { return expert_features_; }

 private:
  const PolicyParameters& policy_;
  const ActionVocab& vocab_;
  const RecordSummary& summary_;
  std::vector<int> expert_features_;
  int label_;
  RewardConfig reward_;
};

}  // namespace eagrl
