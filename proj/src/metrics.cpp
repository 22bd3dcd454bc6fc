#include "tgf/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgf {

namespace {

void check_sizes(const char* what, std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " scores vs " + std::to_string(b) +
                                " labels");
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_sizes("average_precision", scores.size(), labels.size());
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; });
  if (positives == 0) throw std::invalid_argument("average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 0) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(positives);
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes("auc_roc", scores.size(), labels.size());
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; });
  const auto negatives = static_cast<std::ptrdiff_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("auc_roc: need both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U (integer arithmetic keeps the result exact).
  long long twice_u = 0;
  long long negatives_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    long long pos_in_group = 0, neg_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? pos_in_group : neg_in_group) += 1;
      ++j;
    }
    twice_u += pos_in_group * (2 * negatives_below + neg_in_group);
    negatives_below += neg_in_group;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace tgf
