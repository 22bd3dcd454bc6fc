#pragma once

// Self-checks shared by the `grad-check` and `bench-acom` subcommands and
// the acceptance driver.

#include "tgf/grad_check.hpp"
#include "tgf/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tgf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// roll round-trip, softmax / delay-weight / readout normalisation, zero-lag
/// time encoding, residual identity, deterministic replay.
std::vector<CheckResult> run_invariant_sweep(std::uint64_t seed);

struct GradientSuiteOptions {
  ModelConfig model;  ///< alpha is resolved from the toy graph when <= 0
  int seeds = 5;
  int max_attempts = 200;
  std::uint64_t first_seed = 1;
  GradCheckOptions check{1e-4, 1e-4};
  /// Minimum gap between the last selected and the first rejected delay
  /// class for a seed to count as having a unique top-k.
  double selection_margin = 1e-3;
};

GradientSuiteOptions default_gradient_suite();

struct GradientSeedReport {
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index checked = 0;
  Index excluded = 0;
  bool passed = false;
};

struct GradientSuiteReport {
  std::vector<GradientSeedReport> seeds;
  int rejected_seeds = 0;  ///< skipped for a non-unique top-k
  std::vector<std::string> parameter_groups;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// End-to-end loss gradient against central differences over every
/// parameter, on a random toy graph with node and edge features.
GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& opts);

/// True when no perturbation smaller than `margin` can change the selected
/// delay set (mirror delays d and L - d count as one class).
bool selection_is_unique(const Vector& scores, const DelaySelection& sel, double margin);

// ---------------------------------------------------------------------------

struct BenchRow {
  Index length = 0;
  std::string mechanism;  ///< "fft" or "direct"
  double mean_ns = 0.0;
  double stddev_ns = 0.0;
  /// Fastest sample. Interference only ever adds time, so on a shared or
  /// virtualised core this is the steadiest estimate of the cost itself.
  double best_ns = 0.0;
};

struct BenchOptions {
  std::vector<Index> lengths{64, 128, 256, 512, 1024, 2048, 4096};
  Index channels = 16;
  int samples = 25;
  /// Each sample repeats the call until at least this much time has passed.
  double min_sample_ms = 10.0;
  std::uint64_t seed = 0;
};

std::vector<BenchRow> bench_acom(const BenchOptions& opts);
std::string bench_to_csv(const std::vector<BenchRow>& rows);

/// best_ns(L = hi) / best_ns(L = lo) for one mechanism; throws if absent.
double bench_ratio(const std::vector<BenchRow>& rows, const std::string& mechanism, Index lo, Index hi);

}  // namespace tgf
