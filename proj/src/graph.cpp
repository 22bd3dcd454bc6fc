#include "tgf/graph.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace tgf {

TemporalGraph::TemporalGraph(std::vector<Event> events, std::size_t node_count, Index edge_feature_dim)
    : events_(std::move(events)), node_count_(node_count), edge_feature_dim_(edge_feature_dim) {
  if (edge_feature_dim_ < 0) throw DataError("edge_feature_dim must be >= 0");
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (!(e.timestamp >= 0.0) || !std::isfinite(e.timestamp))
      throw DataError("event " + std::to_string(i) + ": timestamp must be finite and >= 0");
    if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= node_count_ ||
        static_cast<std::size_t>(e.dst) >= node_count_)
      throw DataError("event " + std::to_string(i) + ": node id out of range [0, " + std::to_string(node_count_) +
                      ")");
    if (e.features.size() != 0 && e.features.size() != edge_feature_dim_)
      throw DataError("event " + std::to_string(i) + ": feature width " + std::to_string(e.features.size()) +
                      " != " + std::to_string(edge_feature_dim_));
  }
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });

  std::vector<std::size_t> degree(node_count_ + 1, 0);
  for (const Event& e : events_) {
    ++degree[static_cast<std::size_t>(e.src)];
    if (e.dst != e.src) ++degree[static_cast<std::size_t>(e.dst)];
  }
  adj_offsets_.assign(node_count_ + 1, 0);
  for (std::size_t n = 0; n < node_count_; ++n) adj_offsets_[n + 1] = adj_offsets_[n] + degree[n];
  adj_events_.resize(adj_offsets_.back());
  std::vector<std::size_t> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    adj_events_[cursor[static_cast<std::size_t>(e.src)]++] = i;
    if (e.dst != e.src) adj_events_[cursor[static_cast<std::size_t>(e.dst)]++] = i;
  }
  node_features_ = Matrix::Zero(static_cast<Index>(node_count_), 0);
}

std::span<const std::size_t> TemporalGraph::adjacency(NodeId node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= node_count_)
    throw std::out_of_range("node id " + std::to_string(node) + " out of range [0, " + std::to_string(node_count_) +
                            ")");
  const auto n = static_cast<std::size_t>(node);
  return {adj_events_.data() + adj_offsets_[n], adj_offsets_[n + 1] - adj_offsets_[n]};
}

void TemporalGraph::set_node_features(Matrix features) {
  if (features.rows() != static_cast<Index>(node_count_))
    throw DataError("node feature matrix has " + std::to_string(features.rows()) + " rows, expected " +
                    std::to_string(node_count_));
  node_features_ = std::move(features);
}

void TemporalGraph::set_raw_ids(std::vector<std::string> ids) {
  if (ids.size() != node_count_) throw DataError("raw id table size does not match node count");
  raw_ids_ = std::move(ids);
}

RowVector TemporalGraph::edge_features(std::size_t i) const {
  const Event& e = events_.at(i);
  if (e.features.size() == 0) return RowVector::Zero(edge_feature_dim_);
  return e.features;
}

// ---------------------------------------------------------------------------

Index InteractionSequence::real_count() const {
  return static_cast<Index>(std::count(pad.begin(), pad.end(), false));
}

InteractionSequence extract_sequence(const TemporalGraph& g, NodeId node, double t, Index length) {
  if (length < 1) throw std::invalid_argument("extract_sequence: length must be >= 1");
  if (!(t > 0.0)) throw std::invalid_argument("extract_sequence: query time must be > 0");
  auto adj = g.adjacency(node);  // range-checks node

  // First adjacency entry at or after t; everything before is strictly older.
  auto it = std::lower_bound(adj.begin(), adj.end(), t,
                             [&](std::size_t ev, double time) { return g.event(ev).timestamp < time; });
  const auto available = static_cast<Index>(it - adj.begin());
  const Index take = std::min(available, length - 1);
  const Index pads = length - 1 - take;

  InteractionSequence seq;
  seq.anchor_node = node;
  seq.anchor_time = t;
  seq.neighbors.resize(static_cast<std::size_t>(length));
  seq.timestamps.resize(length);
  seq.edge_features = Matrix::Zero(length, g.edge_feature_dim());
  seq.pad.assign(static_cast<std::size_t>(length), false);

  const auto pad_id = static_cast<NodeId>(g.node_count());
  for (Index i = 0; i < pads; ++i) {
    seq.neighbors[static_cast<std::size_t>(i)] = pad_id;
    seq.timestamps(i) = t;
    seq.pad[static_cast<std::size_t>(i)] = true;
  }
  auto first = it - take;
  for (Index i = 0; i < take; ++i) {
    const std::size_t ev = *(first + i);
    const Event& e = g.event(ev);
    const Index row = pads + i;
    seq.neighbors[static_cast<std::size_t>(row)] = e.src == node ? e.dst : e.src;
    seq.timestamps(row) = e.timestamp;
    if (e.features.size() != 0) seq.edge_features.row(row) = e.features;
  }
  seq.neighbors.back() = node;
  seq.timestamps(length - 1) = t;
  return seq;
}

// ---------------------------------------------------------------------------

Splits chronological_split(const TemporalGraph& g, const SplitSpec& spec) {
  const double fr[] = {spec.train_fraction, spec.val_fraction, spec.test_fraction};
  for (double f : fr)
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("split fractions must lie in (0, 1)");
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  const std::size_t n = g.size();
  if (n < 3) throw std::invalid_argument("chronological_split: need at least 3 events, got " + std::to_string(n));
  const auto train_end = static_cast<std::size_t>(std::floor(fr[0] * static_cast<double>(n) + 1e-9));
  const auto val_end = static_cast<std::size_t>(std::floor((fr[0] + fr[1]) * static_cast<double>(n) + 1e-9));
  return Splits{{0, train_end}, {train_end, val_end}, {val_end, n}};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

struct RawRow {
  std::string src, dst;
  double ts;
  RowVector features;
  std::size_t line;
};

}  // namespace

TemporalGraph ingest_csv_text(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  // Header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("csv: missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  auto header = split_commas(line);
  Index src_col = -1, dst_col = -1, ts_col = -1;
  std::vector<Index> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name == schema.src_column) src_col = static_cast<Index>(c);
    else if (name == schema.dst_column) dst_col = static_cast<Index>(c);
    else if (name == schema.time_column) ts_col = static_cast<Index>(c);
    else feature_cols.push_back(static_cast<Index>(c));
  }
  if (src_col < 0 || dst_col < 0 || ts_col < 0)
    throw DataError("csv line " + std::to_string(line_no) + ": header must name columns '" + schema.src_column +
                    "', '" + schema.dst_column + "', '" + schema.time_column + "'");
  const auto width = header.size();
  const auto d_e = static_cast<Index>(feature_cols.size());

  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != width)
      throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " fields, got " + std::to_string(cells.size()));
    RawRow r;
    r.line = line_no;
    r.src = std::string(trim(cells[static_cast<std::size_t>(src_col)]));
    r.dst = std::string(trim(cells[static_cast<std::size_t>(dst_col)]));
    if (r.src.empty() || r.dst.empty())
      throw DataError("csv line " + std::to_string(line_no) + ": empty node id");
    if (!parse_double(cells[static_cast<std::size_t>(ts_col)], r.ts) || !std::isfinite(r.ts))
      throw DataError("csv line " + std::to_string(line_no) + ": malformed timestamp");
    if (r.ts < 0.0) throw DataError("csv line " + std::to_string(line_no) + ": negative timestamp");
    if (d_e > 0) {
      r.features.resize(d_e);
      for (Index f = 0; f < d_e; ++f) {
        double v = 0.0;
        if (!parse_double(cells[static_cast<std::size_t>(feature_cols[static_cast<std::size_t>(f)])], v))
          throw DataError("csv line " + std::to_string(line_no) + ": malformed feature value in column " +
                          std::to_string(feature_cols[static_cast<std::size_t>(f)] + 1));
        r.features(f) = v;
      }
    }
    rows.push_back(std::move(r));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) { return a.ts < b.ts; });
  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> raw;
  auto dense = [&](const std::string& key) {
    auto [it, inserted] = ids.try_emplace(key, static_cast<NodeId>(raw.size()));
    if (inserted) raw.push_back(key);
    return it->second;
  };
  std::vector<Event> events;
  events.reserve(rows.size());
  for (auto& r : rows) {
    Event e;
    e.src = dense(r.src);
    e.dst = dense(r.dst);
    e.timestamp = r.ts;
    e.features = std::move(r.features);
    events.push_back(std::move(e));
  }
  TemporalGraph g(std::move(events), raw.size(), d_e);
  g.set_raw_ids(std::move(raw));
  return g;
}

TemporalGraph ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_csv_text(buf.str(), schema);
}

std::string to_csv(const TemporalGraph& g) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "src,dst,ts";
  for (Index f = 0; f < g.edge_feature_dim(); ++f) os << ",f" << f;
  os << "\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Event& e = g.event(i);
    os << e.src << "," << e.dst << "," << e.timestamp;
    const RowVector f = g.edge_features(i);
    for (Index k = 0; k < f.size(); ++k) os << "," << f(k);
    os << "\n";
  }
  return os.str();
}

void write_csv(const TemporalGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(g);
}

// ---------------------------------------------------------------------------
// Binary cache: "TGFEVLOG" magic, u32 version, u64 nodes, u64 d_e, u64 count,
// then per event: i64 src, i64 dst, f64 ts, u8 has_features, d_e x f64.

namespace {

constexpr char kCacheMagic[8] = {'T', 'G', 'F', 'E', 'V', 'L', 'O', 'G'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("event cache: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_event_cache(const TemporalGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCacheMagic, 8);
  const std::uint32_t v = kCacheVersion;
  const char vb[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                      static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(vb, 4);
  put_u64(out, g.node_count());
  put_u64(out, static_cast<std::uint64_t>(g.edge_feature_dim()));
  put_u64(out, g.size());
  for (const Event& e : g.events()) {
    put_u64(out, static_cast<std::uint64_t>(e.src));
    put_u64(out, static_cast<std::uint64_t>(e.dst));
    put_f64(out, e.timestamp);
    const char has = e.features.size() != 0 ? 1 : 0;
    out.write(&has, 1);
    for (Index k = 0; k < e.features.size(); ++k) put_f64(out, e.features(k));
  }
}

TemporalGraph read_event_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) throw DataError("event cache: bad magic");
  unsigned char vb[4];
  if (!in.read(reinterpret_cast<char*>(vb), 4)) throw DataError("event cache: truncated file");
  const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
  if (version != kCacheVersion) throw DataError("event cache: unsupported version " + std::to_string(version));
  const auto nodes = get_u64(in);
  const auto d_e = static_cast<Index>(get_u64(in));
  const auto count = get_u64(in);
  std::vector<Event> events;
  events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.src = static_cast<NodeId>(get_u64(in));
    e.dst = static_cast<NodeId>(get_u64(in));
    e.timestamp = get_f64(in);
    char has = 0;
    if (!in.read(&has, 1)) throw DataError("event cache: truncated file");
    if (has) {
      e.features.resize(d_e);
      for (Index k = 0; k < d_e; ++k) e.features(k) = get_f64(in);
    }
    events.push_back(std::move(e));
  }
  return TemporalGraph(std::move(events), nodes, d_e);
}

}  // namespace tgf
