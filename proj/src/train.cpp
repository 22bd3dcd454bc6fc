#include "tgf/train.hpp"

#include "tgf/metrics.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_set>

namespace tgf {

void TrainConfig::validate() const {
  if (max_epochs < 0) throw std::invalid_argument("train: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (max_epochs > 0 && patience >= max_epochs)
    throw std::invalid_argument("train: patience must be smaller than max_epochs");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (workers < 1) throw std::invalid_argument("train: workers must be >= 1");
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double learning_rate, const AdamConfig& cfg) {
  if (state.first.size() != params.size()) {
    state.first.clear();
    state.second.clear();
    for (const Parameter* p : params) {
      state.first.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.value.size() == 0) continue;
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
  }
}

std::string to_json_line(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["train_loss"] = log.train_loss;
  j["val_ap"] = log.val_ap ? nlohmann::json(*log.val_ap) : nlohmann::json(nullptr);
  j["val_auc"] = log.val_auc ? nlohmann::json(*log.val_auc) : nlohmann::json(nullptr);
  j["elapsed_s"] = log.elapsed_s;
  return j.dump();
}

double train_step(TGFormerModel& model, const TemporalGraph& g, std::span<const std::size_t> positives,
                  std::span<const NodeId> negative_dst, AdamState& state, const TrainConfig& cfg) {
  if (positives.size() != negative_dst.size())
    throw std::invalid_argument("train_step: one negative destination per positive required");
  model.parameters().zero_grad();
  Tape tape;
  std::vector<Var> preds;
  std::vector<double> labels;
  preds.reserve(2 * positives.size());
  labels.reserve(2 * positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Event& e = g.event(positives[i]);
    auto [hu, hv] = forward(tape, model, g, e.src, e.dst, e.timestamp);
    preds.push_back(predict_link(tape, hu, hv, model.predictor()));
    labels.push_back(1.0);
    auto [nu, nv] = forward(tape, model, g, e.src, negative_dst[i], e.timestamp);
    preds.push_back(predict_link(tape, nu, nv, model.predictor()));
    labels.push_back(0.0);
  }
  Var loss = bce_loss(preds, labels);
  const double value = loss.scalar();
  if (!std::isfinite(value)) return value;
  tape.backward(loss);
  auto ptrs = model.parameters().pointers();
  adam_step(ptrs, state, cfg.learning_rate, cfg.adam);
  return value;
}

namespace {

std::vector<Matrix> snapshot(const ParameterSet& ps) {
  std::vector<Matrix> out;
  out.reserve(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) out.push_back(ps[i].value);
  return out;
}

void restore(ParameterSet& ps, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value = values[i];
}

}  // namespace

TrainResult train(TGFormerModel& model, const TemporalGraph& g, const Splits& splits, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  if (cfg.max_epochs == 0 || splits.train.size() == 0) return result;

  Rng rng(cfg.seed);
  AdamState adam;
  std::vector<Matrix> best = snapshot(model.parameters());
  int since_best = 0;
  const auto start = std::chrono::steady_clock::now();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    std::size_t batch_index = 0;
    for (std::size_t b = splits.train.begin; b < splits.train.end; b += batch, ++batch_index) {
      const std::size_t e = std::min(b + batch, splits.train.end);
      std::vector<std::size_t> pos;
      std::vector<NodeId> neg;
      for (std::size_t i = b; i < e; ++i) {
        pos.push_back(i);
        neg.push_back(sample_negative(g, NegativeStrategy::random, g.event(i), {}, rng).dst);
      }
      const double loss = train_step(model, g, pos, neg, adam, cfg);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + " (events [" + std::to_string(b) + ", " +
                            std::to_string(e) + "))");
      total += loss;
      count += 2 * pos.size();
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(count);
    if (splits.val.size() > 0) {
      Rng val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
      EvalOptions opts;
      opts.batch_size = cfg.batch_size;
      opts.workers = cfg.workers;
      EvalReport rep = evaluate(model, g, splits, splits.val, opts, val_rng);
      log.val_ap = rep.ap;
      log.val_auc = rep.auc_roc;
    }
    log.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool improved = !log.val_ap || !result.best_val_ap || *log.val_ap > *result.best_val_ap;
    if (improved) {
      result.best_epoch = epoch;
      result.best_val_ap = log.val_ap;
      best = snapshot(model.parameters());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  restore(model.parameters(), best);
  return result;
}

// ---------------------------------------------------------------------------

std::string to_string(Regime r) { return r == Regime::transductive ? "transductive" : "inductive"; }

Regime parse_regime(const std::string& name) {
  if (name == "transductive") return Regime::transductive;
  if (name == "inductive") return Regime::inductive;
  throw std::invalid_argument("unknown evaluation regime '" + name + "'");
}

std::string to_json(const EvalReport& r) {
  nlohmann::json j = {{"ap", r.ap},
                      {"auc_roc", r.auc_roc},
                      {"strategy", to_string(r.strategy)},
                      {"regime", to_string(r.regime)},
                      {"n_samples", r.n_samples},
                      {"fallbacks", r.fallbacks}};
  return j.dump(2);
}

EvalReport evaluate(const PairScorer& scorer, const TemporalGraph& g, const Splits& splits, EventRange range,
                    const EvalOptions& opts, Rng& rng) {
  if (opts.batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  if (opts.workers < 1) throw std::invalid_argument("evaluate: workers must be >= 1");

  std::vector<bool> seen(g.node_count(), false);
  for (std::size_t i = splits.train.begin; i < splits.train.end; ++i) {
    seen[static_cast<std::size_t>(g.event(i).src)] = true;
    seen[static_cast<std::size_t>(g.event(i).dst)] = true;
  }
  std::vector<std::size_t> positives;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const Event& e = g.event(i);
    if (opts.regime == Regime::inductive && seen[static_cast<std::size_t>(e.src)] &&
        seen[static_cast<std::size_t>(e.dst)])
      continue;
    positives.push_back(i);
  }
  if (positives.empty())
    throw std::invalid_argument("evaluate: no positives left for the " + to_string(opts.regime) + " regime");

  const EdgeSet train_edges = EdgeSet::from_events(g, splits.train.begin, splits.train.end);
  EdgeSet past, past_untrained;
  std::size_t past_end = 0;

  struct Query {
    NodeId u, v;
    double t;
  };
  std::vector<Query> queries;
  std::vector<int> labels;
  queries.reserve(2 * positives.size());
  EvalReport report;
  report.strategy = opts.strategy;
  report.regime = opts.regime;

  const auto batch = static_cast<std::size_t>(opts.batch_size);
  for (std::size_t b = 0; b < positives.size(); b += batch) {
    const std::size_t e = std::min(b + batch, positives.size());
    for (; past_end < positives[b]; ++past_end) {
      const Event& pe = g.event(past_end);
      past.insert(pe.src, pe.dst);
      if (!train_edges.contains(pe.src, pe.dst)) past_untrained.insert(pe.src, pe.dst);
    }
    EdgeSet current;
    for (std::size_t i = b; i < e; ++i) current.insert(g.event(positives[i]).src, g.event(positives[i]).dst);
    NegativeContext ctx;
    ctx.train_edges = &train_edges;
    ctx.current_edges = &current;
    ctx.past_edges = opts.strategy == NegativeStrategy::inductive ? &past_untrained : &past;
    for (std::size_t i = b; i < e; ++i) {
      const Event& pos = g.event(positives[i]);
      NegativeSample neg = sample_negative(g, opts.strategy, pos, ctx, rng);
      if (neg.fallback) ++report.fallbacks;
      queries.push_back({pos.src, pos.dst, pos.timestamp});
      labels.push_back(1);
      queries.push_back({neg.src, neg.dst, pos.timestamp});
      labels.push_back(0);
    }
  }

  std::vector<double> scores(queries.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      scores[i] = opts.oracle ? static_cast<double>(labels[i]) : scorer(queries[i].u, queries[i].v, queries[i].t);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(opts.workers), queries.size());
  if (workers <= 1) {
    work(0, queries.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk, end = std::min(queries.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  report.ap = average_precision(scores, labels);
  report.auc_roc = auc_roc(scores, labels);
  report.n_samples = queries.size();
  return report;
}

EvalReport evaluate(const TGFormerModel& model, const TemporalGraph& g, const Splits& splits, EventRange range,
                    const EvalOptions& opts, Rng& rng) {
  PairScorer scorer = [&](NodeId u, NodeId v, double t) { return score_pair(model, g, u, v, t); };
  return evaluate(scorer, g, splits, range, opts, rng);
}

}  // namespace tgf
