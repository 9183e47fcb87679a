#include "eagrl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "eagrl/error.hpp"

namespace eagrl {
namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw MetricError("labels and scores differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw MetricError("labels must be 0 or 1");
}

}  // namespace

double auroc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups; every quantity below is a multiple of 0.5, so
  // the sum is exact.
  double rank_sum_pos = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        n_pos += 1.0;
      }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw MetricError("auroc requires both classes");
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auprc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return labels[a] < labels[b];
  });
  double hits = 0.0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 1) continue;
    hits += 1.0;
    precision_sum += hits / static_cast<double>(rank + 1);
  }
  if (hits == 0.0) throw MetricError("auprc requires at least one positive");
  return precision_sum / hits;
}

}  // namespace eagrl
