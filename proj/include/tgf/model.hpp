#pragma once

#include "tgf/acom.hpp"
#include "tgf/encoders.hpp"
#include "tgf/graph.hpp"
#include "tgf/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tgf {

struct ModelConfig {
  Index length = 32;  ///< L, including the self-loop slot
  Index d = 8;        ///< per-block width; the series width is 4d
  Index d_node = 8;
  Index d_edge = 8;
  Index d_time = 8;
  Index d_freq = 8;
  Index heads = 2;
  Index layers = 1;
  double c = 2.0;
  double alpha = 0.0;  ///< <= 0: derive from the training span
  double beta = 1.0;
  Index predictor_hidden = 0;  ///< <= 0: 4d
  Index node_raw_dim = 0;
  Index edge_raw_dim = 0;
  bool count_self_loop = true;

  Index width() const { return 4 * d; }
  Index hidden() const { return predictor_hidden > 0 ? predictor_hidden : 4 * d; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct SeriesLayerParams {
  AcomConfig acom;
  Parameter* w_out = nullptr;
  LayerNorm ln_acom, ln_ffn;
  Linear ffn_in, ffn_out;
};

struct PredictorParams {
  Linear hidden, out;
};

/// Per-sequence record of what the series layers selected.
struct SequenceTrace {
  std::vector<AcomTrace> layers;
  Vector readout_weights;  ///< lambda over the non-PAD event rows
  std::vector<Index> readout_rows;
};

struct PairTrace {
  SequenceTrace u, v;
};

class TGFormerModel {
 public:
  /// `config.alpha` must already be resolved (> 0).
  TGFormerModel(const ModelConfig& config, std::uint64_t seed);

  TGFormerModel(const TGFormerModel&) = delete;
  TGFormerModel& operator=(const TGFormerModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  const EncoderParams& encoder() const { return encoder_; }
  const std::vector<SeriesLayerParams>& layers() const { return layers_; }
  Parameter& readout_weight() const { return *readout_; }
  const PredictorParams& predictor() const { return predictor_; }

 private:
  ModelConfig config_;
  ParameterSet params_;
  EncoderParams encoder_;
  std::vector<SeriesLayerParams> layers_;
  Parameter* readout_ = nullptr;
  PredictorParams predictor_;
};

/// Pre-LN block: Z' = ACoM(LN1(Z)) + Z; out = FFN(LN2(Z')) + Z'.
Var series_layer(Tape& tape, const Var& z, const SeriesLayerParams& layer, AcomTrace* trace = nullptr);

/// h = H_anchor + sum_l lambda_l H_l, lambda = softmax over non-PAD event
/// rows of (H_anchor || H_l) . w. The anchor is the last row. `weight` is
/// 8d x 1.
Var adaptive_readout(Tape& tape, const Var& h, const std::vector<bool>& pad_mask, Parameter& weight,
                     SequenceTrace* trace = nullptr);

/// Node representations (1 x 4d each) for the query (u, v, t).
std::pair<Var, Var> forward(Tape& tape, const TGFormerModel& model, const TemporalGraph& g, NodeId u, NodeId v,
                            double t, PairTrace* trace = nullptr);

/// Encoder + series layers + readout for one side, given both sequences.
Var represent(Tape& tape, const TGFormerModel& model, const TemporalGraph& g, const InteractionSequence& seq,
              const FrequencyCounts& counts, SequenceTrace* trace = nullptr);

/// Class-1 probability (1 x 1) of softmax(MLP(ReLU(MLP(h_u || h_v)))).
Var predict_link(Tape& tape, const Var& h_u, const Var& h_v, const PredictorParams& predictor);

inline constexpr double kProbabilityClamp = 1e-7;

/// Summed binary cross-entropy; predictions clamped to [eps, 1 - eps].
Var bce_loss(std::span<const Var> predictions, std::span<const double> labels);
double bce_loss(std::span<const double> predictions, std::span<const double> labels);

/// Probability for (u, v, t) on a gradient-free tape.
double score_pair(const TGFormerModel& model, const TemporalGraph& g, NodeId u, NodeId v, double t);

// ---------------------------------------------------------------------------
// Checkpoints: `path` holds the parameter blob, `path + ".json"` the config.

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

void save_checkpoint(const TGFormerModel& model, const std::filesystem::path& path);
/// Loads parameters into `model`; throws if the stored config differs.
void load_checkpoint(TGFormerModel& model, const std::filesystem::path& path);
/// Reads the stored config only.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace tgf
