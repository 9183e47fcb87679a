#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

// Brute-force reference implementations for the ranking metrics.
namespace oracles {

// Mean over every (positive, negative) pair.
inline double pair_auroc(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        ++pairs;
      }
  return wins / pairs;
}

// Average precision minimized over every ordering that ranks by descending
// score, i.e. positives placed after negatives inside ties.
inline double ordering_auprc(const std::vector<int>& y, const std::vector<double>& s) {
  std::vector<int> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  double worst = 2.0;
  do {
    bool sorted = true;
    for (std::size_t k = 1; k < idx.size() && sorted; ++k) sorted = s[idx[k - 1]] >= s[idx[k]];
    if (!sorted) continue;
    double ap = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (y[idx[k]] == 1) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
    worst = std::min(worst, ap / hits);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return worst;
}

}  // namespace oracles
