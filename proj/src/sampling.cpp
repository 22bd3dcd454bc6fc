#include "tgf/sampling.hpp"

#include <stdexcept>

namespace tgf {

std::string to_string(NegativeStrategy s) {
  switch (s) {
    case NegativeStrategy::random: return "random";
    case NegativeStrategy::historical: return "historical";
    case NegativeStrategy::inductive: return "inductive";
  }
  return "unknown";
}

NegativeStrategy parse_strategy(const std::string& name) {
  if (name == "random") return NegativeStrategy::random;
  if (name == "historical") return NegativeStrategy::historical;
  if (name == "inductive") return NegativeStrategy::inductive;
  throw std::invalid_argument("unknown negative sampling strategy '" + name + "'");
}

EdgeSet::EdgeSet(std::initializer_list<Edge> edges) {
  for (const auto& [s, d] : edges) insert(s, d);
}

void EdgeSet::insert(NodeId src, NodeId dst) {
  if (keys_.insert(key(src, dst)).second) edges_.emplace_back(src, dst);
}

EdgeSet EdgeSet::from_events(const TemporalGraph& g, std::size_t begin, std::size_t end) {
  EdgeSet out;
  for (std::size_t i = begin; i < end && i < g.size(); ++i) out.insert(g.event(i).src, g.event(i).dst);
  return out;
}

namespace {

bool in(const EdgeSet* set, NodeId s, NodeId d) { return set != nullptr && set->contains(s, d); }

NegativeSample random_destination(const TemporalGraph& g, const Event& positive, Rng& rng) {
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(g.node_count()) - 1);
  return {positive.src, node(rng), false};
}

}  // namespace

NegativeSample sample_negative(const TemporalGraph& g, NegativeStrategy strategy, const Event& positive,
                               const NegativeContext& ctx, Rng& rng) {
  if (g.node_count() == 0) throw std::invalid_argument("sample_negative: graph has no nodes");
  if (strategy == NegativeStrategy::random) return random_destination(g, positive, rng);

  auto fallback = [&] {
    NegativeSample s = random_destination(g, positive, rng);
    s.fallback = true;
    return s;
  };

  if (strategy == NegativeStrategy::historical) {
    if (ctx.past_edges == nullptr || ctx.past_edges->empty()) return fallback();
    const auto& pool = ctx.past_edges->edges();
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
      const auto& [s, d] = pool[pick(rng)];
      if (!in(ctx.current_edges, s, d)) return {s, d, false};
    }
    return fallback();
  }

  // Inductive. First prefer pairs that were observed but never trained on.
  if (ctx.past_edges != nullptr && !ctx.past_edges->empty()) {
    const auto& pool = ctx.past_edges->edges();
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
      const auto& [s, d] = pool[pick(rng)];
      if (!in(ctx.train_edges, s, d) && !in(ctx.current_edges, s, d)) return {s, d, false};
    }
  }
  // Then any pair outside the training set.
  const auto n = static_cast<NodeId>(g.node_count());
  std::uniform_int_distribution<NodeId> node(0, n - 1);
  for (int attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
    const NodeId s = node(rng), d = node(rng);
    if (!in(ctx.train_edges, s, d) && !in(ctx.current_edges, s, d)) return {s, d, false};
  }
  // Small graphs: enumerate the complement exactly before giving up.
  if (n * n <= 65536) {
    std::vector<EdgeSet::Edge> free;
    for (NodeId s = 0; s < n; ++s)
      for (NodeId d = 0; d < n; ++d)
        if (!in(ctx.train_edges, s, d) && !in(ctx.current_edges, s, d)) free.emplace_back(s, d);
    if (!free.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
      const auto& [s, d] = free[pick(rng)];
      return {s, d, false};
    }
  }
  return fallback();
}

}  // namespace tgf
