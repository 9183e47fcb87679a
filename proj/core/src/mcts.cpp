#include "eagrl/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "eagrl/error.hpp"

namespace eagrl {

void validate(const SearchConfig& cfg) {
  if (cfg.n_rollouts < 1) throw ConfigError("search.n_rollouts must be >= 1");
  if (cfg.max_depth < 1) throw ConfigError("search.max_depth must be >= 1");
  if (!(cfg.uct_weight >= 0.0)) throw ConfigError("search.uct_weight must be >= 0");
  if (cfg.branching < 1) throw ConfigError("search.branching must be >= 1");
  if (cfg.topk < 1) throw ConfigError("search.topk must be >= 1");
  validate(cfg.reward);
}

double uct_score(double q, int parent_visits, int edge_visits, double uct_weight) {
  if (edge_visits <= 0) return std::numeric_limits<double>::infinity();
  const double log_n = parent_visits > 0 ? std::log(static_cast<double>(parent_visits)) : 0.0;
  return q + uct_weight * std::sqrt(log_n / static_cast<double>(edge_visits));
}

int uct_select(const SearchNode& node, double uct_weight) {
  if (node.edges.empty()) throw SelectionError("uct_select: node has no children");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(node.edges.size()); ++i) {
    const SearchEdge& e = node.edges[i];
    const double score = uct_score(e.q, node.visits, e.visits, uct_weight);
    if (best < 0 || score > best_score || (score == best_score && e.action < node.edges[best].action)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

int expand(SearchTree& tree, int node, const SearchDomain& domain, int d, Rng& rng) {
  if (tree.nodes[node].terminal) return 0;
  if (!tree.nodes[node].edges.empty()) return 0;
  const std::vector<int> prefix = tree.nodes[node].tokens;
  const std::vector<int> actions = domain.propose(prefix, d, rng);
  for (int action : actions) {
    Expansion x = domain.apply(prefix, action, rng);
    SearchNode child;
    child.tokens = prefix;
    child.tokens.insert(child.tokens.end(), x.appended.begin(), x.appended.end());
    child.parent = node;
    child.action = action;
    child.depth = tree.nodes[node].depth + 1;
    child.terminal = x.terminal;
    const int child_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(std::move(child));
    tree.nodes[node].edges.push_back({action, child_index, 0, 0.0, x.local_reward});
  }
  return static_cast<int>(actions.size());
}

int simulate(SearchTree& tree, int node, const SearchDomain& domain, int d, Rng& rng, SearchPath& path) {
  int cur = node;
  while (!tree.nodes[cur].terminal) {
    if (tree.nodes[cur].edges.empty() && expand(tree, cur, domain, d, rng) == 0)
      throw SelectionError("simulate: non-terminal node produced no candidates");
    const auto& edges = tree.nodes[cur].edges;
    int best = 0;
    for (int i = 1; i < static_cast<int>(edges.size()); ++i) {
      if (edges[i].local_reward > edges[best].local_reward ||
          (edges[i].local_reward == edges[best].local_reward && edges[i].action < edges[best].action))
        best = i;
    }
    path.emplace_back(cur, best);
    cur = edges[best].child;
  }
  return cur;
}

void backpropagate(SearchTree& tree, const SearchPath& path, int leaf, double ret) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    SearchEdge& e = tree.nodes[it->first].edges[it->second];
    e.visits += 1;
    e.q += (ret - e.q) / static_cast<double>(e.visits);
    tree.nodes[it->first].visits += 1;
  }
  tree.nodes[leaf].visits += 1;
}

SearchResult run_search(const SearchDomain& domain, const SearchConfig& cfg, Rng& rng) {
  validate(cfg);
  SearchResult result;
  SearchTree& tree = result.tree;
  SearchNode root;
  root.terminal = domain.is_terminal(root.tokens);
  tree.nodes.push_back(std::move(root));
  std::map<std::vector<int>, std::size_t> seen;

  for (int iter = 0; iter < cfg.n_rollouts; ++iter) {
    RolloutLog log;
    const std::size_t created_before = tree.nodes.size();
    int cur = 0;
    while (!tree.nodes[cur].terminal && tree.nodes[cur].visits > 0 && !tree.nodes[cur].edges.empty()) {
      const int e = uct_select(tree.nodes[cur], cfg.uct_weight);
      log.path.emplace_back(cur, e);
      cur = tree.nodes[cur].edges[e].child;
    }
    const int leaf = tree.nodes[cur].terminal ? cur : simulate(tree, cur, domain, cfg.branching, rng, log.path);
    SearchNode& leaf_node = tree.nodes[leaf];
    if (!leaf_node.reward) leaf_node.reward = domain.evaluate(leaf_node.tokens);
    const RewardBreakdown reward = *leaf_node.reward;
    backpropagate(tree, log.path, leaf, reward.total);

    if (seen.emplace(tree.nodes[leaf].tokens, result.terminals.size()).second)
      result.terminals.push_back({tree.nodes[leaf].tokens, reward});
    for (std::size_t n = created_before; n < tree.nodes.size(); ++n) log.expanded_actions.push_back(tree.nodes[n].action);
    log.leaf = leaf;
    log.ret = reward.total;
    result.rollouts.push_back(std::move(log));
  }
  return result;
}

std::vector<TerminalTrajectory> extract_topk(std::span<const TerminalTrajectory> terminals, int k) {
  if (terminals.empty()) throw ExtractionError("extract_topk: no terminal trajectories");
  if (k < 1) throw ArgumentError("extract_topk: k must be >= 1");
  std::vector<TerminalTrajectory> sorted(terminals.begin(), terminals.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const TerminalTrajectory& a, const TerminalTrajectory& b) {
    if (a.reward.total != b.reward.total) return a.reward.total > b.reward.total;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  });
  if (static_cast<int>(sorted.size()) > k) sorted.resize(k);
  return sorted;
}

PatientSearchDomain::PatientSearchDomain(const PolicyParameters& policy, const ActionVocab& vocab,
                                         const RecordSummary& summary, std::vector<int> expert_features, int label,
                                         const RewardConfig& reward)
    : policy_(policy),
      vocab_(vocab),
      summary_(summary),
      expert_features_(std::move(expert_features)),
      label_(label),
      reward_(reward) {}

bool PatientSearchDomain::is_terminal(std::span<const int> prefix) const {
  return replay(vocab_, prefix).phase == Phase::kDone;
}

std::vector<int> PatientSearchDomain::propose(std::span<const int> prefix, int d, Rng& rng) const {
  const DecodeState state = replay(vocab_, prefix);
  std::vector<double> weights = step_distribution(policy_, vocab_, summary_, state);
  std::vector<int> out;
  for (int i = 0; i < d; ++i) {
    double remaining = 0.0;
    for (double w : weights) remaining += w;
    if (!(remaining > 0.0)) break;
    const int pick = sample_index(weights, rng);
    out.push_back(pick);
    weights[pick] = 0.0;
  }
  return out;
}

Expansion PatientSearchDomain::apply(std::span<const int> prefix, int action, Rng& rng) const {
  const DecodeState state = replay(vocab_, prefix);
  if (!is_legal(vocab_, state, action)) throw ConsistencyError("apply: illegal action");
  Expansion x;
  x.action = action;
  x.local_reward = local_usefulness(vocab_, state, action, expert_features_, summary_);
  if (vocab_.kind(action) == TokenKind::kFinalize) {
    std::vector<int> with_finalize(prefix.begin(), prefix.end());
    with_finalize.push_back(action);
    const std::vector<int> full = complete_tokens(policy_, vocab_, summary_, with_finalize, &rng);
    x.appended.assign(full.begin() + static_cast<std::ptrdiff_t>(prefix.size()), full.end());
    x.terminal = true;
  } else {
    x.appended = {action};
  }
  return x;
}

RewardBreakdown PatientSearchDomain::evaluate(std::span<const int> terminal_tokens) const {
  const FinalAnswer final = decode_final(vocab_, terminal_tokens);
  return score_prediction(final.prediction, final.declared, label_, expert_features_, reward_);
}

}  // namespace eagrl
