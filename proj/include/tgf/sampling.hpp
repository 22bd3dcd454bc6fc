#pragma once

// Negative edge sampling for link-prediction training and evaluation.

#include "tgf/graph.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tgf {

using Rng = std::mt19937_64;

enum class NegativeStrategy { random, historical, inductive };

std::string to_string(NegativeStrategy s);
NegativeStrategy parse_strategy(const std::string& name);

/// Set of directed (src, dst) pairs with O(1) membership and uniform draws.
class EdgeSet {
 public:
  using Edge = std::pair<NodeId, NodeId>;

  EdgeSet() = default;
  EdgeSet(std::initializer_list<Edge> edges);

  void insert(NodeId src, NodeId dst);
  bool contains(NodeId src, NodeId dst) const { return keys_.count(key(src, dst)) != 0; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// All (src, dst) pairs of events in [begin, end).
  static EdgeSet from_events(const TemporalGraph& g, std::size_t begin, std::size_t end);

 private:
  static std::uint64_t key(NodeId s, NodeId d) {
    return (static_cast<std::uint64_t>(s) << 32) ^ static_cast<std::uint64_t>(d);
  }
  std::unordered_set<std::uint64_t> keys_;
  std::vector<Edge> edges_;
};

/// Edge sets relevant to one evaluation step. Null pointers mean "empty".
struct NegativeContext {
  const EdgeSet* train_edges = nullptr;
  /// Pairs seen before the current step (historical pool; also the
  /// preferred inductive pool after removing training pairs).
  const EdgeSet* past_edges = nullptr;
  /// Positives interacting at the current step.
  const EdgeSet* current_edges = nullptr;
};

struct NegativeSample {
  NodeId src = 0;
  NodeId dst = 0;
  /// True when the constrained pool was empty or the retry budget ran out
  /// and the pair was drawn by the random strategy instead.
  bool fallback = false;
};

inline constexpr int kNegativeRetryBudget = 100;

/// random: source kept, destination uniform over all nodes.
/// historical: a past pair not interacting at the current step.
/// inductive: a pair absent from the training edges.
NegativeSample sample_negative(const TemporalGraph& g, NegativeStrategy strategy, const Event& positive,
                               const NegativeContext& ctx, Rng& rng);

}  // namespace tgf
