#pragma once

// Turns an InteractionSequence into the L x 4d matrix fed to the series
// layers: node, edge, time and co-occurrence-frequency blocks, each projected
// to width d and concatenated in that order.

#include "tgf/graph.hpp"
#include "tgf/nn.hpp"

#include <random>
#include <utility>

namespace tgf {

struct EncoderConfig {
  Index node_raw_dim = 0;  ///< width of graph node features (0 = none)
  Index edge_raw_dim = 0;  ///< width of event features (0 = none)
  Index d = 8;
  Index d_node = 8;
  Index d_edge = 8;
  Index d_time = 8;
  Index d_freq = 8;
  double alpha = 10.0;
  double beta = 1.0;
  /// Whether the self-loop row's neighbour (the anchor) is counted.
  bool count_self_loop = true;
};

/// omega_i = alpha^{-(i-1)/beta}, i = 1..d_time.
Vector time_frequencies(Index d_time, double alpha, double beta);

/// alpha such that t_max * alpha^{-(d_time-1)/beta} == 1.
double default_alpha(double t_max, Index d_time, double beta);

struct EncoderParams {
  Linear node_hidden, node_out;
  Linear edge_hidden, edge_out;
  Linear freq_hidden, freq_out;
  Linear proj_node, proj_edge, proj_time, proj_freq;
  Vector omega;  ///< fixed; never bound to a tape as a parameter

  static EncoderParams create(ParameterSet& set, const EncoderConfig& cfg, std::mt19937_64& rng);
};

/// L x 2 co-occurrence counts: column 0 counts the row's neighbour inside
/// S_u, column 1 inside S_v. PAD rows are (0, 0).
using FrequencyCounts = Eigen::Matrix<int, Eigen::Dynamic, 2>;

struct EncodedSequence {
  Var values;  ///< L x 4d
  std::vector<bool> pad_mask;
};

std::pair<Var, Var> encode_node_edge(Tape& tape, const TemporalGraph& g, const InteractionSequence& seq,
                                     const EncoderParams& params);

/// Row i = cos((anchor_t - t_i) * omega). Constant with respect to the tape.
Matrix encode_time(const InteractionSequence& seq, double anchor_t, const Vector& omega);

std::pair<FrequencyCounts, FrequencyCounts> count_frequencies(const InteractionSequence& seq_u,
                                                              const InteractionSequence& seq_v,
                                                              bool count_self_loop = true);

/// f(F[:, 0]) + f(F[:, 1]) with the shared two-layer ReLU map f.
Var encode_frequency(Tape& tape, const FrequencyCounts& counts, const EncoderParams& params);

EncodedSequence align_concat(Tape& tape, const Var& node, const Var& edge, const Var& time, const Var& freq,
                             const EncoderParams& params, std::vector<bool> pad_mask = {});

/// Full encoder for one side of a query pair.
EncodedSequence encode_sequence(Tape& tape, const TemporalGraph& g, const InteractionSequence& seq,
                                const FrequencyCounts& counts, const EncoderParams& params);

}  // namespace tgf
