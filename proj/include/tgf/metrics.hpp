#pragma once

#include <span>

namespace tgf {

/// Rank-based average precision: sum over the descending-score ranking of
/// precision@k times the recall increment at k. Equal scores keep their
/// input order. Throws if no label is positive.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Probability that a random positive outscores a random negative, ties
/// counted 1/2. Throws unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

}  // namespace tgf
