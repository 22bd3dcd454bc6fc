#pragma once

// Planted-periodicity temporal graphs (block-model stand-in) and the check
// that asks whether learned delays line up with the planted periods.

#include "tgf/graph.hpp"
#include "tgf/model.hpp"
#include "tgf/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tgf {

struct SynthSpec {
  std::int64_t nodes = 100;
  std::int64_t blocks = 2;
  std::vector<double> periods{7.0, 30.0};
  double duration = 90.0;
  /// Events per active pair per period slot: floor(rate) copies plus one
  /// more with probability frac(rate).
  double base_rate = 1.0;
  /// Probability that an intra-block pair is active at all.
  double pair_density = 0.1;
  /// Timestamp noise (std-dev, same unit as the periods).
  double phase_jitter = 0.25;
  /// Uniform inter-block events over [0, duration].
  std::int64_t noise_events = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::vector<std::int64_t> block_of;  ///< per node
  std::vector<double> periods;
  double duration = 0.0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  TemporalGraph graph;
  GroundTruth truth;
};

/// Intra-block active pair (a, b) emits, for each period p and slot
/// m = 1 .. floor(duration / p), events at (m - 1) p + phi + noise with a
/// per-(pair, period) phase phi in (0, p]. Times are clipped into
/// [0, duration]. Deterministic in `seed`.
SynthResult generate_periodic_graph(const SynthSpec& spec);

/// Expected event count of the periodic part (noise events excluded).
double expected_periodic_events(const SynthSpec& spec);

std::string truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const std::string& text);

// ---------------------------------------------------------------------------

/// One sequence's delay ranking plus its timestamps (oldest first).
struct PeriodProbe {
  std::vector<Index> delays;  ///< descending score
  Vector timestamps;
  std::vector<bool> pad;
};

struct PeriodCheckReport {
  std::size_t evaluated = 0;
  std::size_t recovered = 0;
  double fraction = 0.0;
  /// Mean over evaluated probes of the share of admissible lags that would
  /// count as a hit; the expected fraction for delays chosen at random.
  double chance_fraction = 0.0;
  /// Delay histogram of the winning lags (index = lag).
  std::vector<std::size_t> lag_histogram;
};

/// Circular lag folded into [0, L/2]: roll by d and by L - d are mirror
/// images for symmetric scores.
Index fold_lag(Index delay, Index length);

/// True when `lag * gap` is within `tolerance * p` of some m * p, m >= 1.
bool lag_matches_period(Index lag, double gap, const std::vector<double>& periods, double tolerance = 0.2);

/// For each probe the best-ranked delay with a non-zero folded lag is turned
/// into time units with the median gap between consecutive real events and
/// matched against the planted periods. Probes with fewer than three real
/// events are skipped.
PeriodCheckReport planted_period_check(const std::vector<PeriodProbe>& probes, const std::vector<double>& periods,
                                       double tolerance = 0.2);

/// Runs the model on (src, dst, t) of events [begin, end) and returns one
/// probe per (sequence, layer, head) whose sequence has at least
/// `min_real_events` non-PAD rows before the self-loop.
std::vector<PeriodProbe> collect_period_probes(const TGFormerModel& model, const TemporalGraph& g, std::size_t begin,
                                               std::size_t end, Index min_real_events);

}  // namespace tgf
