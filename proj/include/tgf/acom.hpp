#pragma once

// Auto-correlation in place of dot-product attention.
//
// For a length-L series the score of delay d is
//   R(d) = (1/L) sum_ch sum_i Q(i, ch) K((i - d) mod L, ch),
// computed for all d at once through the spectrum Q^ . conj(K^). The k best
// delays are softmax-weighted and the value series is rolled by each delay
// and blended.

#include "tgf/array.hpp"

#include <cmath>
#include <vector>

namespace tgf {

struct AcomConfig {
  Index heads = 1;
  Index model_width = 8;  ///< 4d; must be divisible by heads
  double c = 2.0;
  Index length = 8;  ///< L

  /// floor(c * ln L), clamped into [1, L].
  Index top_k() const;
  /// Unclamped floor(c * ln L).
  Index raw_top_k() const;
  void validate() const;
};

struct DelaySelection {
  std::vector<Index> delays;  ///< ordered by descending score
  Vector weights;             ///< softmax over the selected raw scores
  bool clamped = false;       ///< k was moved into [1, L]
};

/// Spectral route, value level. Q, K are L x m; returns length-L scores.
Vector autocorrelation_scores(const Matrix& q, const Matrix& k);

/// Quadratic direct sum of the same quantity (used by the benchmark).
Vector autocorrelation_scores_direct(const Matrix& q, const Matrix& k);

/// Differentiable scores as a 1 x L row.
Var autocorrelation_scores(const Var& q, const Var& k);

/// Indices of the k largest scores (ties: smaller delay first), plus the
/// softmax of those scores.
DelaySelection select_delays(const Vector& scores, Index k);
DelaySelection select_delays(const Vector& scores, const AcomConfig& cfg);

/// sum_i w_i * roll(V, delay_i).
Matrix time_delay_aggregate(const Matrix& v, const DelaySelection& sel);
Var time_delay_aggregate(const Var& v, const std::vector<Index>& delays, const Var& weights);

/// Selections recorded during a forward pass, one per head.
struct AcomTrace {
  std::vector<DelaySelection> heads;
  std::vector<Vector> scores;
};

/// Single head: scores -> select (indices held constant) -> aggregate.
Var acom_head(const Var& q, const Var& k, const Var& v, const AcomConfig& cfg, AcomTrace* trace = nullptr);

/// Splits channels into `heads` groups, runs acom_head on each, concatenates
/// and right-multiplies by the output projection (model_width x model_width).
Var acom_multihead(const Var& q, const Var& k, const Var& v, const AcomConfig& cfg, const Var& w_out,
                   AcomTrace* trace = nullptr);

}  // namespace tgf
