#pragma once

// Event log, per-node chronological adjacency, and history extraction.

#include "tgf/array.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgf {

using NodeId = std::int64_t;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Event {
  NodeId src = 0;
  NodeId dst = 0;
  double timestamp = 0.0;
  /// Empty when the source had no edge features; read as zeros downstream.
  RowVector features;
};

class TemporalGraph {
 public:
  TemporalGraph() = default;

  /// Stable-sorts by timestamp and builds the adjacency index. Throws
  /// DataError on negative timestamps, ids outside [0, node_count), or
  /// feature vectors whose width is neither 0 nor edge_feature_dim.
  TemporalGraph(std::vector<Event> events, std::size_t node_count, Index edge_feature_dim = 0);

  const std::vector<Event>& events() const { return events_; }
  const Event& event(std::size_t i) const { return events_.at(i); }
  std::size_t size() const { return events_.size(); }
  std::size_t node_count() const { return node_count_; }
  Index edge_feature_dim() const { return edge_feature_dim_; }

  /// Event indices touching `node`, in timestamp order.
  std::span<const std::size_t> adjacency(NodeId node) const;

  /// Optional per-node raw features (node_count x d); zero columns if absent.
  const Matrix& node_features() const { return node_features_; }
  void set_node_features(Matrix features);

  /// Original identifiers keyed by dense id (empty when built in memory).
  const std::vector<std::string>& raw_ids() const { return raw_ids_; }
  void set_raw_ids(std::vector<std::string> ids);

  /// Edge features of event i as a row of width edge_feature_dim.
  RowVector edge_features(std::size_t i) const;

  double min_time() const { return events_.empty() ? 0.0 : events_.front().timestamp; }
  double max_time() const { return events_.empty() ? 0.0 : events_.back().timestamp; }

 private:
  std::vector<Event> events_;
  std::size_t node_count_ = 0;
  Index edge_feature_dim_ = 0;
  std::vector<std::size_t> adj_offsets_;
  std::vector<std::size_t> adj_events_;
  Matrix node_features_;
  std::vector<std::string> raw_ids_;
};

/// The length-L history ending in the anchor's self-loop. Entries run oldest
/// to newest; padding fills the oldest slots.
struct InteractionSequence {
  NodeId anchor_node = 0;
  double anchor_time = 0.0;
  std::vector<NodeId> neighbors;  ///< PAD rows hold pad_id (== node_count)
  Vector timestamps;              ///< PAD rows hold anchor_time
  Matrix edge_features;           ///< L x d_E, zero rows for PAD and self-loop
  std::vector<bool> pad;

  Index length() const { return static_cast<Index>(neighbors.size()); }
  Index real_count() const;
};

InteractionSequence extract_sequence(const TemporalGraph& g, NodeId node, double t, Index length);

// ---------------------------------------------------------------------------
// Chronological split

struct SplitSpec {
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
};

struct EventRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct Splits {
  EventRange train, val, test;
};

Splits chronological_split(const TemporalGraph& g, const SplitSpec& spec = {});

// ---------------------------------------------------------------------------
// Ingestion / serialisation

struct CsvSchema {
  std::string src_column = "src";
  std::string dst_column = "dst";
  std::string time_column = "ts";
};

/// Reads `src,dst,ts[,f0,...]`. Node ids are re-indexed densely in order of
/// first chronological appearance; raw ids are kept on the graph.
TemporalGraph ingest_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
TemporalGraph ingest_csv_text(const std::string& text, const CsvSchema& schema = {});

/// Writes the event log in the ingest format (dense ids).
void write_csv(const TemporalGraph& g, const std::filesystem::path& path);
std::string to_csv(const TemporalGraph& g);

/// Little-endian binary cache of the sorted event log.
void write_event_cache(const TemporalGraph& g, const std::filesystem::path& path);
TemporalGraph read_event_cache(const std::filesystem::path& path);

}  // namespace tgf
