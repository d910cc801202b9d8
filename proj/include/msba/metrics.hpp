#pragma once

#include <vector>

namespace msba::metrics {

// Rank-based AUC with average ranks for ties (half credit per tied pair).
// Throws when a class is absent or a score is non-finite.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// A score equal to the threshold counts as a fake prediction.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

}  // namespace msba::metrics
