#pragma once

// Training loop (Adam, chronological mini-batches, early stopping on
// validation AP) and link-prediction evaluation.

#include "tgf/model.hpp"
#include "tgf/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int max_epochs = 100;
  int patience = 10;
  double learning_rate = 1e-5;
  Index batch_size = 200;
  AdamConfig adam;
  std::uint64_t seed = 0;
  /// Evaluation parallelism used for the per-epoch validation pass.
  int workers = 1;

  void validate() const;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long long step = 0;
};

/// One bias-corrected Adam update from each parameter's accumulated grad.
void adam_step(std::span<Parameter* const> params, AdamState& state, double learning_rate, const AdamConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  ///< mean BCE per prediction
  std::optional<double> val_ap;
  std::optional<double> val_auc;
  double elapsed_s = 0.0;
};

std::string to_json_line(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;  ///< 0 when nothing was trained
  std::optional<double> best_val_ap;
  bool early_stopped = false;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Forward, summed BCE, backward and one Adam step on a fixed batch of
/// positives with the given negative destinations. Returns the summed loss.
double train_step(TGFormerModel& model, const TemporalGraph& g, std::span<const std::size_t> positives,
                  std::span<const NodeId> negative_dst, AdamState& state, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs until max_epochs or until validation AP fails to improve for
/// `patience` epochs; leaves the best-validation parameters in `model`.
TrainResult train(TGFormerModel& model, const TemporalGraph& g, const Splits& splits, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------

enum class Regime { transductive, inductive };

std::string to_string(Regime r);
Regime parse_regime(const std::string& name);

struct EvalReport {
  double ap = 0.0;
  double auc_roc = 0.0;
  NegativeStrategy strategy = NegativeStrategy::random;
  Regime regime = Regime::transductive;
  std::size_t n_samples = 0;   ///< positives + negatives
  std::size_t fallbacks = 0;   ///< negatives drawn by the random fallback
};

std::string to_json(const EvalReport& r);

/// Scores a candidate link (u, v) at time t; larger means more likely.
using PairScorer = std::function<double(NodeId u, NodeId v, double t)>;

struct EvalOptions {
  NegativeStrategy strategy = NegativeStrategy::random;
  Regime regime = Regime::transductive;
  Index batch_size = 200;
  int workers = 1;
  /// Test hook: every sample is scored with its own label, so all metrics
  /// must come out at exactly 1.
  bool oracle = false;
};

/// One negative per positive of `range`, pooled AP and AUC. `splits.train`
/// defines the training edges and the nodes seen in training.
EvalReport evaluate(const PairScorer& scorer, const TemporalGraph& g, const Splits& splits, EventRange range,
                    const EvalOptions& opts, Rng& rng);

EvalReport evaluate(const TGFormerModel& model, const TemporalGraph& g, const Splits& splits, EventRange range,
                    const EvalOptions& opts, Rng& rng);

}  // namespace tgf
