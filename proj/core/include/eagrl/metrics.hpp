#pragma once

#include <span>

namespace eagrl {

// Mann-Whitney statistic: mean over (positive, negative) pairs of
// 1[s_p > s_n] + 0.5 * 1[s_p == s_n]. Throws MetricError unless both classes
// are present.
double auroc(std::span<const int> labels, std::span<const double> scores);

// Average precision: mean over positives (visited in descending score order)
// of precision at their rank. Within tied scores negatives are ranked first.
// Throws MetricError when there is no positive.
double auprc(std::span<const int> labels, std::span<const double> scores);

}  // namespace eagrl
