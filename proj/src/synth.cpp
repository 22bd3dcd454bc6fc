#include "tgf/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tgf {

void SynthSpec::validate() const {
  if (nodes < 1) throw std::invalid_argument("nodes must be >= 1");
  if (blocks < 1) throw std::invalid_argument("blocks must be >= 1");
  if (blocks > nodes) throw std::invalid_argument("blocks must not exceed nodes");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  if (periods.empty()) throw std::invalid_argument("periods must not be empty");
  for (double p : periods) {
    if (!(p > 0.0)) throw std::invalid_argument("periods must be positive");
    if (!(p < duration)) throw std::invalid_argument("periods must be smaller than duration");
  }
  if (!(base_rate >= 0.0)) throw std::invalid_argument("base_rate must be >= 0");
  if (!(pair_density >= 0.0 && pair_density <= 1.0)) throw std::invalid_argument("pair_density must lie in [0, 1]");
  if (!(phase_jitter >= 0.0)) throw std::invalid_argument("phase_jitter must be >= 0");
  if (noise_events < 0) throw std::invalid_argument("noise_events must be >= 0");
  if (noise_events > 0 && blocks < 2) throw std::invalid_argument("noise_events needs at least two blocks");
}

namespace {

// Independent stream per (pair, period) so the output does not depend on
// iteration order.
Rng derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return Rng(seq);
}

std::vector<std::int64_t> assign_blocks(const SynthSpec& spec) {
  // Round-robin then shuffled: block sizes differ by at most one.
  std::vector<std::int64_t> block_of(static_cast<std::size_t>(spec.nodes));
  for (std::size_t i = 0; i < block_of.size(); ++i) block_of[i] = static_cast<std::int64_t>(i) % spec.blocks;
  Rng rng = derived_rng(spec.seed, 0xb10c, 0, 0);
  std::shuffle(block_of.begin(), block_of.end(), rng);
  return block_of;
}

double clip_time(double t, double duration) {
  // Strictly positive: a query at time 0 has no admissible history.
  return std::clamp(t, duration * 1e-9, duration);
}

}  // namespace

double expected_periodic_events(const SynthSpec& spec) {
  double pairs = 0.0;
  for (std::int64_t b = 0; b < spec.blocks; ++b) {
    const double n = static_cast<double>(spec.nodes / spec.blocks + (b < spec.nodes % spec.blocks ? 1 : 0));
    pairs += n * (n - 1.0) / 2.0;
  }
  double slots = 0.0;
  for (double p : spec.periods) slots += std::floor(spec.duration / p + 1e-9);
  return pairs * spec.pair_density * slots * spec.base_rate;
}

SynthResult generate_periodic_graph(const SynthSpec& spec) {
  spec.validate();
  SynthResult out;
  out.truth.block_of = assign_blocks(spec);
  out.truth.periods = spec.periods;
  out.truth.duration = spec.duration;
  out.truth.seed = spec.seed;
  const auto& block_of = out.truth.block_of;

  const double whole = std::floor(spec.base_rate);
  const double frac = spec.base_rate - whole;
  std::vector<Event> events;
  const auto n = static_cast<std::uint64_t>(spec.nodes);
  for (std::uint64_t a = 0; a < n; ++a) {
    for (std::uint64_t b = a + 1; b < n; ++b) {
      if (block_of[a] != block_of[b]) continue;
      Rng pair_rng = derived_rng(spec.seed, a, b, 0xffff);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(pair_rng) >= spec.pair_density) continue;
      const bool flip = unit(pair_rng) < 0.5;
      const auto src = static_cast<NodeId>(flip ? b : a);
      const auto dst = static_cast<NodeId>(flip ? a : b);
      for (std::size_t pi = 0; pi < spec.periods.size(); ++pi) {
        const double p = spec.periods[pi];
        Rng rng = derived_rng(spec.seed, a, b, pi);
        // phi in (0, p]
        const double phi = p * (1.0 - unit(rng));
        std::normal_distribution<double> noise(0.0, spec.phase_jitter);
        const auto slots = static_cast<std::int64_t>(std::floor(spec.duration / p + 1e-9));
        for (std::int64_t m = 1; m <= slots; ++m) {
          int copies = static_cast<int>(whole);
          if (frac > 0.0 && unit(rng) < frac) ++copies;
          for (int c = 0; c < copies; ++c) {
            double t = static_cast<double>(m - 1) * p + phi;
            if (spec.phase_jitter > 0.0) t += noise(rng);
            events.push_back({src, dst, clip_time(t, spec.duration), {}});
          }
        }
      }
    }
  }

  if (spec.noise_events > 0) {
    Rng rng = derived_rng(spec.seed, 0x5e, 0x5e, 0x5e);
    std::uniform_int_distribution<std::int64_t> pick(0, spec.nodes - 1);
    std::uniform_real_distribution<double> when(0.0, spec.duration);
    for (std::int64_t i = 0; i < spec.noise_events; ++i) {
      NodeId s = 0, d = 0;
      do {
        s = pick(rng);
        d = pick(rng);
      } while (block_of[static_cast<std::size_t>(s)] == block_of[static_cast<std::size_t>(d)]);
      events.push_back({s, d, clip_time(when(rng), spec.duration), {}});
    }
  }

  // Canonical order before the stable sort, so ties do not depend on the
  // generation loop.
  std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
    if (x.timestamp != y.timestamp) return x.timestamp < y.timestamp;
    if (x.src != y.src) return x.src < y.src;
    return x.dst < y.dst;
  });
  out.graph = TemporalGraph(std::move(events), static_cast<std::size_t>(spec.nodes), 0);
  return out;
}

std::string truth_to_json(const GroundTruth& t) {
  nlohmann::json j;
  j["block_of"] = t.block_of;
  j["periods"] = t.periods;
  j["duration"] = t.duration;
  j["seed"] = t.seed;
  return j.dump(2);
}

GroundTruth truth_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GroundTruth t;
  t.block_of = j.at("block_of").get<std::vector<std::int64_t>>();
  t.periods = j.at("periods").get<std::vector<double>>();
  t.duration = j.at("duration").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

// ---------------------------------------------------------------------------

Index fold_lag(Index delay, Index length) {
  if (length < 1) throw std::invalid_argument("fold_lag: length must be >= 1");
  const Index d = ((delay % length) + length) % length;
  return std::min(d, length - d);
}

bool lag_matches_period(Index lag, double gap, const std::vector<double>& periods, double tolerance) {
  if (lag <= 0 || !(gap > 0.0)) return false;
  const double span = static_cast<double>(lag) * gap;
  for (double p : periods) {
    const double m = std::max(1.0, std::round(span / p));
    if (std::abs(span - m * p) <= tolerance * p) return true;
  }
  return false;
}

namespace {

double median_gap(const PeriodProbe& probe) {
  // Real event rows only; the last row is the query's self-loop.
  std::vector<double> ts;
  const Index L = probe.timestamps.size();
  for (Index i = 0; i + 1 < L; ++i)
    if (!probe.pad[static_cast<std::size_t>(i)]) ts.push_back(probe.timestamps(i));
  if (ts.size() < 3) return 0.0;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < ts.size(); ++i) gaps.push_back(ts[i] - ts[i - 1]);
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
  double med = gaps[mid];
  if (gaps.size() % 2 == 0) {
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

}  // namespace

PeriodCheckReport planted_period_check(const std::vector<PeriodProbe>& probes, const std::vector<double>& periods,
                                       double tolerance) {
  PeriodCheckReport r;
  double chance = 0.0;
  for (const PeriodProbe& probe : probes) {
    const Index L = probe.timestamps.size();
    if (L < 2 || static_cast<Index>(probe.pad.size()) != L) continue;
    const double gap = median_gap(probe);
    if (!(gap > 0.0)) continue;
    Index lag = 0;
    for (Index d : probe.delays) {
      lag = fold_lag(d, L);
      if (lag != 0) break;
    }
    if (lag == 0) continue;

    ++r.evaluated;
    if (r.lag_histogram.size() <= static_cast<std::size_t>(lag)) r.lag_histogram.resize(lag + 1, 0);
    ++r.lag_histogram[static_cast<std::size_t>(lag)];
    if (lag_matches_period(lag, gap, periods, tolerance)) ++r.recovered;

    Index admissible = 0, hits = 0;
    for (Index l = 1; l <= L / 2; ++l) {
      ++admissible;
      if (lag_matches_period(l, gap, periods, tolerance)) ++hits;
    }
    chance += static_cast<double>(hits) / static_cast<double>(admissible);
  }
  if (r.evaluated > 0) {
    r.fraction = static_cast<double>(r.recovered) / static_cast<double>(r.evaluated);
    r.chance_fraction = chance / static_cast<double>(r.evaluated);
  }
  return r;
}

std::vector<PeriodProbe> collect_period_probes(const TGFormerModel& model, const TemporalGraph& g, std::size_t begin,
                                               std::size_t end, Index min_real_events) {
  std::vector<PeriodProbe> probes;
  const Index L = model.config().length;
  end = std::min(end, g.size());
  for (std::size_t i = begin; i < end; ++i) {
    const Event& e = g.event(i);
    Tape tape(false);
    PairTrace trace;
    forward(tape, model, g, e.src, e.dst, e.timestamp, &trace);
    const std::pair<NodeId, const SequenceTrace*> sides[] = {{e.src, &trace.u}, {e.dst, &trace.v}};
    for (const auto& [node, st] : sides) {
      const InteractionSequence seq = extract_sequence(g, node, e.timestamp, L);
      if (seq.real_count() - 1 < min_real_events) continue;
      for (const AcomTrace& layer : st->layers)
        for (const DelaySelection& sel : layer.heads) probes.push_back({sel.delays, seq.timestamps, seq.pad});
    }
  }
  return probes;
}

}  // namespace tgf
