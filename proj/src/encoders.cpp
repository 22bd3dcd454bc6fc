#include "tgf/encoders.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace tgf {

Vector time_frequencies(Index d_time, double alpha, double beta) {
  if (d_time < 1) throw std::invalid_argument("time encoding width must be >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("time encoding needs alpha > 0 and beta > 0");
  Vector omega(d_time);
  for (Index i = 0; i < d_time; ++i) omega(i) = std::pow(alpha, -static_cast<double>(i) / beta);
  return omega;
}

double default_alpha(double t_max, Index d_time, double beta) {
  // Below t_max = 2 the formula would give alpha <= ~1 and a flat spectrum.
  const double span = std::max(t_max, 2.0);
  if (d_time <= 1) return span;
  return std::pow(span, beta / static_cast<double>(d_time - 1));
}

EncoderParams EncoderParams::create(ParameterSet& set, const EncoderConfig& cfg, std::mt19937_64& rng) {
  if (cfg.d < 1 || cfg.d_node < 1 || cfg.d_edge < 1 || cfg.d_time < 1 || cfg.d_freq < 1)
    throw std::invalid_argument("encoder widths must be >= 1");
  EncoderParams p;
  p.node_hidden = Linear::create(set, "encoder.node_mlp.hidden", cfg.node_raw_dim, cfg.d_node, rng);
  p.node_out = Linear::create(set, "encoder.node_mlp.out", cfg.d_node, cfg.d_node, rng);
  p.edge_hidden = Linear::create(set, "encoder.edge_mlp.hidden", cfg.edge_raw_dim, cfg.d_edge, rng);
  p.edge_out = Linear::create(set, "encoder.edge_mlp.out", cfg.d_edge, cfg.d_edge, rng);
  p.freq_hidden = Linear::create(set, "encoder.freq_mlp.hidden", 1, cfg.d_freq, rng);
  p.freq_out = Linear::create(set, "encoder.freq_mlp.out", cfg.d_freq, cfg.d_freq, rng);
  p.proj_node = Linear::create(set, "encoder.proj_node", cfg.d_node, cfg.d, rng);
  p.proj_edge = Linear::create(set, "encoder.proj_edge", cfg.d_edge, cfg.d, rng);
  p.proj_time = Linear::create(set, "encoder.proj_time", cfg.d_time, cfg.d, rng);
  p.proj_freq = Linear::create(set, "encoder.proj_freq", cfg.d_freq, cfg.d, rng);
  p.omega = time_frequencies(cfg.d_time, cfg.alpha, cfg.beta);
  return p;
}

std::pair<Var, Var> encode_node_edge(Tape& tape, const TemporalGraph& g, const InteractionSequence& seq,
                                     const EncoderParams& params) {
  const Index L = seq.length();
  const Matrix& nf = g.node_features();
  if (nf.cols() != params.node_hidden.in())
    throw ShapeError("encode_node_edge: node features have width " + std::to_string(nf.cols()) +
                     ", encoder expects " + std::to_string(params.node_hidden.in()));
  if (seq.edge_features.cols() != params.edge_hidden.in())
    throw ShapeError("encode_node_edge: edge features have width " + std::to_string(seq.edge_features.cols()) +
                     ", encoder expects " + std::to_string(params.edge_hidden.in()));

  Matrix node_raw = Matrix::Zero(L, nf.cols());
  if (nf.cols() > 0) {
    for (Index i = 0; i < L; ++i)
      if (!seq.pad[static_cast<std::size_t>(i)]) node_raw.row(i) = nf.row(seq.neighbors[static_cast<std::size_t>(i)]);
  }
  Var node_in = tape.constant(std::move(node_raw));
  Var edge_in = tape.constant(seq.edge_features);
  Var node = params.node_out(tape, relu(params.node_hidden(tape, node_in)));
  Var edge = params.edge_out(tape, relu(params.edge_hidden(tape, edge_in)));
  return {node, edge};
}

Matrix encode_time(const InteractionSequence& seq, double anchor_t, const Vector& omega) {
  const Index L = seq.length();
  Matrix out(L, omega.size());
  for (Index i = 0; i < L; ++i) {
    const double dt = anchor_t - seq.timestamps(i);
    if (dt < 0.0)
      throw std::invalid_argument("encode_time: entry " + std::to_string(i) + " lies after the anchor time");
    out.row(i) = (dt * omega.transpose()).array().cos().matrix();
  }
  return out;
}

std::pair<FrequencyCounts, FrequencyCounts> count_frequencies(const InteractionSequence& seq_u,
                                                              const InteractionSequence& seq_v,
                                                              bool count_self_loop) {
  auto tally = [count_self_loop](const InteractionSequence& s) {
    std::unordered_map<NodeId, int> counts;
    const Index L = s.length();
    for (Index i = 0; i < L; ++i) {
      if (s.pad[static_cast<std::size_t>(i)]) continue;
      if (!count_self_loop && i == L - 1) continue;
      ++counts[s.neighbors[static_cast<std::size_t>(i)]];
    }
    return counts;
  };
  const auto in_u = tally(seq_u);
  const auto in_v = tally(seq_v);
  auto lookup = [](const std::unordered_map<NodeId, int>& m, NodeId n) {
    auto it = m.find(n);
    return it == m.end() ? 0 : it->second;
  };
  auto fill = [&](const InteractionSequence& s) {
    FrequencyCounts f = FrequencyCounts::Zero(s.length(), 2);
    for (Index i = 0; i < s.length(); ++i) {
      if (s.pad[static_cast<std::size_t>(i)]) continue;
      const NodeId n = s.neighbors[static_cast<std::size_t>(i)];
      f(i, 0) = lookup(in_u, n);
      f(i, 1) = lookup(in_v, n);
    }
    return f;
  };
  return {fill(seq_u), fill(seq_v)};
}

Var encode_frequency(Tape& tape, const FrequencyCounts& counts, const EncoderParams& params) {
  auto f = [&](Index col) {
    Var c = tape.constant(counts.col(col).cast<double>());
    return params.freq_out(tape, relu(params.freq_hidden(tape, c)));
  };
  return add(f(0), f(1));
}

EncodedSequence align_concat(Tape& tape, const Var& node, const Var& edge, const Var& time, const Var& freq,
                             const EncoderParams& params, std::vector<bool> pad_mask) {
  auto check = [](const char* what, const Var& v, const Linear& proj) {
    if (v.cols() != proj.in())
      throw ShapeError(std::string("align_concat: ") + what + " block has width " + std::to_string(v.cols()) +
                       ", projection expects " + std::to_string(proj.in()));
  };
  check("node", node, params.proj_node);
  check("edge", edge, params.proj_edge);
  check("time", time, params.proj_time);
  check("frequency", freq, params.proj_freq);
  const Index L = node.rows();
  if (edge.rows() != L || time.rows() != L || freq.rows() != L)
    throw ShapeError("align_concat: blocks disagree on sequence length");
  Var out = concat({params.proj_node(tape, node), params.proj_edge(tape, edge), params.proj_time(tape, time),
                    params.proj_freq(tape, freq)},
                   1);
  if (pad_mask.empty()) pad_mask.assign(static_cast<std::size_t>(L), false);
  return {out, std::move(pad_mask)};
}

EncodedSequence encode_sequence(Tape& tape, const TemporalGraph& g, const InteractionSequence& seq,
                                const FrequencyCounts& counts, const EncoderParams& params) {
  auto [node, edge] = encode_node_edge(tape, g, seq, params);
  Var time = tape.constant(encode_time(seq, seq.anchor_time, params.omega));
  Var freq = encode_frequency(tape, counts, params);
  return align_concat(tape, node, edge, time, freq, params, seq.pad);
}

}  // namespace tgf
