#include "tgf/cli.hpp"

#include "tgf/synth.hpp"
#include "tgf/train.hpp"
#include "tgf/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace tgf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json defaults() {
  const SynthSpec s;
  const ModelConfig m;
  const TrainConfig t;
  const BenchOptions b;
  return json{
      {"seed", 0},
      {"output_dir", "tgformer_out"},
      {"workers", 1},
      {"data", {{"events", ""}, {"ground_truth", ""}, {"split", {{"train", 0.70}, {"val", 0.15}, {"test", 0.15}}}}},
      {"synth",
       {{"nodes", s.nodes},
        {"blocks", s.blocks},
        {"periods", s.periods},
        {"duration", s.duration},
        {"base_rate", s.base_rate},
        {"pair_density", s.pair_density},
        {"phase_jitter", s.phase_jitter},
        {"noise_events", s.noise_events}}},
      {"model",
       {{"length", m.length},
        {"d", m.d},
        {"d_node", m.d_node},
        {"d_edge", m.d_edge},
        {"d_time", m.d_time},
        {"d_freq", m.d_freq},
        {"heads", m.heads},
        {"layers", m.layers},
        {"c", m.c},
        {"alpha", m.alpha},
        {"beta", m.beta},
        {"predictor_hidden", m.predictor_hidden},
        {"count_self_loop", m.count_self_loop}}},
      {"train",
       {{"max_epochs", t.max_epochs},
        {"patience", t.patience},
        {"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}}}},
      {"eval",
       {{"checkpoint", ""},
        {"strategies", {"random", "historical", "inductive"}},
        {"regimes", {"transductive", "inductive"}},
        {"batch_size", 200},
        {"period_check_events", 500}}},
      {"grad_check", {{"seeds", 5}}},
      {"bench",
       {{"lengths", b.lengths}, {"channels", b.channels}, {"samples", b.samples}, {"min_sample_ms", b.min_sample_ms}}},
  };
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return !(a.is_number_integer() && b.is_number_float());
  return a.type() == b.type();
}

std::string kind_name(const json& j) {
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  return j.type_name();
}

// Overlays `src` onto `dst`; every key must already exist with a compatible type.
void merge(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("unknown key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key);
    } else if (!same_kind(slot, it.value())) {
      throw ConfigError(key + ": expected " + kind_name(slot) + ", got " + kind_name(it.value()));
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare strings
  }
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge(cfg, patch, "");
}

template <typename T>
T get(const json& cfg, const std::string& dotted) {
  const json* node = &cfg;
  std::string rest = dotted;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    node = &node->at(rest.substr(0, pos));
  return node->at(rest).get<T>();
}

// Config-level failures from the library's validators are reported as
// config errors with the section name prefixed.
template <typename F>
void validated(const std::string& section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section + "." + e.what());
  }
}

SynthSpec synth_from(const json& cfg) {
  SynthSpec s;
  const json& j = cfg.at("synth");
  s.nodes = j.at("nodes").get<std::int64_t>();
  s.blocks = j.at("blocks").get<std::int64_t>();
  s.periods = j.at("periods").get<std::vector<double>>();
  s.duration = j.at("duration").get<double>();
  s.base_rate = j.at("base_rate").get<double>();
  s.pair_density = j.at("pair_density").get<double>();
  s.phase_jitter = j.at("phase_jitter").get<double>();
  s.noise_events = j.at("noise_events").get<std::int64_t>();
  s.seed = cfg.at("seed").get<std::uint64_t>();
  validated("synth", [&] { s.validate(); });
  return s;
}

ModelConfig model_from(const json& cfg) {
  ModelConfig m;
  const json& j = cfg.at("model");
  m.length = j.at("length").get<Index>();
  m.d = j.at("d").get<Index>();
  m.d_node = j.at("d_node").get<Index>();
  m.d_edge = j.at("d_edge").get<Index>();
  m.d_time = j.at("d_time").get<Index>();
  m.d_freq = j.at("d_freq").get<Index>();
  m.heads = j.at("heads").get<Index>();
  m.layers = j.at("layers").get<Index>();
  m.c = j.at("c").get<double>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.predictor_hidden = j.at("predictor_hidden").get<Index>();
  m.count_self_loop = j.at("count_self_loop").get<bool>();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

TrainConfig train_from(const json& cfg) {
  TrainConfig t;
  const json& j = cfg.at("train");
  t.max_epochs = j.at("max_epochs").get<int>();
  t.patience = j.at("patience").get<int>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.batch_size = j.at("batch_size").get<Index>();
  t.adam.beta1 = j.at("adam").at("beta1").get<double>();
  t.adam.beta2 = j.at("adam").at("beta2").get<double>();
  t.adam.eps = j.at("adam").at("eps").get<double>();
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.workers = cfg.at("workers").get<int>();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

SplitSpec split_from(const json& cfg) {
  SplitSpec s;
  s.train_fraction = get<double>(cfg, "data.split.train");
  s.val_fraction = get<double>(cfg, "data.split.val");
  s.test_fraction = get<double>(cfg, "data.split.test");
  return s;
}

struct Context {
  json cfg;
  fs::path out_dir;
  bool quiet = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  std::ostream& log() const {
    static std::ostream null(nullptr);
    return quiet ? null : *out;
  }
};

fs::path events_path(const Context& ctx) {
  const auto p = get<std::string>(ctx.cfg, "data.events");
  return p.empty() ? ctx.out_dir / "events.csv" : fs::path(p);
}

fs::path truth_path(const Context& ctx) {
  const auto p = get<std::string>(ctx.cfg, "data.ground_truth");
  return p.empty() ? ctx.out_dir / "ground_truth.json" : fs::path(p);
}

fs::path checkpoint_path(const Context& ctx) {
  const auto p = get<std::string>(ctx.cfg, "eval.checkpoint");
  return p.empty() ? ctx.out_dir / "checkpoint.bin" : fs::path(p);
}

TemporalGraph load_events(const Context& ctx) {
  const fs::path p = events_path(ctx);
  if (!fs::exists(p)) throw ConfigError("data.events: file not found: " + p.string());
  return ingest_csv(p);
}

Splits load_splits(const Context& ctx, const TemporalGraph& g) {
  try {
    return chronological_split(g, split_from(ctx.cfg));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data.split: ") + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

int cmd_generate(const Context& ctx) {
  const SynthSpec spec = synth_from(ctx.cfg);
  const SynthResult r = generate_periodic_graph(spec);
  fs::create_directories(ctx.out_dir);
  const fs::path csv = ctx.out_dir / "events.csv";
  const fs::path truth = ctx.out_dir / "ground_truth.json";
  write_csv(r.graph, csv);
  write_text(truth, truth_to_json(r.truth) + "\n");
  *ctx.out << "generated " << r.graph.size() << " events over " << r.graph.node_count() << " nodes (expected "
           << std::fixed << std::setprecision(1) << expected_periodic_events(spec) << " periodic + "
           << spec.noise_events << " noise)\n"
           << "  " << csv.string() << "\n  " << truth.string() << "\n";
  return kExitOk;
}

int cmd_train(const Context& ctx) {
  ModelConfig mc = model_from(ctx.cfg);
  TrainConfig tc = train_from(ctx.cfg);
  const TemporalGraph g = load_events(ctx);
  const Splits splits = load_splits(ctx, g);
  if (splits.train.size() == 0) throw ConfigError("data.split: training split is empty");
  mc.node_raw_dim = g.node_features().cols();
  mc.edge_raw_dim = g.edge_feature_dim();
  if (!(mc.alpha > 0.0)) mc.alpha = default_alpha(g.event(splits.train.end - 1).timestamp, mc.d_time, mc.beta);

  fs::create_directories(ctx.out_dir);
  TGFormerModel model(mc, tc.seed);
  ctx.log() << "training on " << splits.train.size() << " events (val " << splits.val.size() << ", test "
            << splits.test.size() << "), " << model.parameters().scalar_count() << " parameters\n";
  std::ofstream epoch_log(ctx.out_dir / "epoch_log.jsonl", std::ios::binary);
  const TrainResult res = train(model, g, splits, tc, [&](const EpochLog& l) {
    epoch_log << to_json_line(l) << '\n';
    epoch_log.flush();
    ctx.log() << "  epoch " << l.epoch << "  loss " << std::setprecision(5) << l.train_loss;
    if (l.val_ap) ctx.log() << "  val_ap " << *l.val_ap << "  val_auc " << *l.val_auc;
    ctx.log() << '\n';
  });
  const fs::path ckpt = ctx.out_dir / "checkpoint.bin";
  save_checkpoint(model, ckpt);

  json summary{{"epochs_run", res.log.size()},
               {"best_epoch", res.best_epoch},
               {"best_val_ap", res.best_val_ap ? json(*res.best_val_ap) : json(nullptr)},
               {"early_stopped", res.early_stopped},
               {"checkpoint", ckpt.string()}};
  write_text(ctx.out_dir / "train_summary.json", summary.dump(2) + "\n");
  *ctx.out << "trained " << res.log.size() << " epochs; best epoch " << res.best_epoch;
  if (res.best_val_ap) *ctx.out << " (val AP " << std::setprecision(4) << *res.best_val_ap << ")";
  *ctx.out << "\n  " << ckpt.string() << "\n";
  return kExitOk;
}

json period_report_json(const PeriodCheckReport& r) {
  return json{{"evaluated", r.evaluated},
              {"recovered", r.recovered},
              {"fraction", r.fraction},
              {"chance_fraction", r.chance_fraction},
              {"lag_histogram", r.lag_histogram}};
}

int cmd_eval(const Context& ctx, bool perfect_oracle) {
  const TemporalGraph g = load_events(ctx);
  const Splits splits = load_splits(ctx, g);
  if (splits.test.size() == 0) throw ConfigError("data.split: test split is empty");
  const auto strategies = get<std::vector<std::string>>(ctx.cfg, "eval.strategies");
  const auto regimes = get<std::vector<std::string>>(ctx.cfg, "eval.regimes");
  EvalOptions base;
  base.batch_size = get<Index>(ctx.cfg, "eval.batch_size");
  base.workers = get<int>(ctx.cfg, "workers");
  if (base.batch_size < 1) throw ConfigError("eval.batch_size must be >= 1");
  if (base.workers < 1) throw ConfigError("workers must be >= 1");
  std::vector<std::pair<NegativeStrategy, Regime>> matrix;
  for (const auto& r : regimes) {
    for (const auto& s : strategies) {
      try {
        matrix.emplace_back(parse_strategy(s), parse_regime(r));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("eval: ") + e.what());
      }
    }
  }

  std::unique_ptr<TGFormerModel> model;
  PairScorer scorer;
  if (perfect_oracle) {
    base.oracle = true;
    scorer = [](NodeId, NodeId, double) { return 0.0; };
  } else {
    const fs::path ckpt = checkpoint_path(ctx);
    if (!fs::exists(ckpt) || !fs::exists(fs::path(ckpt.string() + ".json")))
      throw ConfigError("eval.checkpoint: no checkpoint at " + ckpt.string() + " (run `train` first)");
    const ModelConfig mc = read_checkpoint_config(ckpt);
    model = std::make_unique<TGFormerModel>(mc, 0);
    load_checkpoint(*model, ckpt);
    const TGFormerModel* m = model.get();
    scorer = [m, &g](NodeId u, NodeId v, double t) { return score_pair(*m, g, u, v, t); };
  }

  json reports = json::array();
  *ctx.out << std::left << std::setw(14) << "regime" << std::setw(12) << "strategy" << std::setw(10) << "AP"
           << std::setw(10) << "AUC" << std::setw(10) << "samples"
           << "fallbacks\n";
  for (const auto& [strategy, regime] : matrix) {
    EvalOptions opts = base;
    opts.strategy = strategy;
    opts.regime = regime;
    Rng rng(get<std::uint64_t>(ctx.cfg, "seed"));
    json entry{{"strategy", to_string(strategy)}, {"regime", to_string(regime)}};
    try {
      const EvalReport r = evaluate(scorer, g, splits, splits.test, opts, rng);
      entry = json::parse(to_json(r));
      *ctx.out << std::setw(14) << to_string(regime) << std::setw(12) << to_string(strategy) << std::fixed
               << std::setprecision(4) << std::setw(10) << r.ap << std::setw(10) << r.auc_roc << std::setw(10)
               << r.n_samples << r.fallbacks << "\n";
    } catch (const std::invalid_argument& e) {
      entry["skipped"] = e.what();
      *ctx.out << std::setw(14) << to_string(regime) << std::setw(12) << to_string(strategy) << "skipped: " << e.what()
               << "\n";
    }
    reports.push_back(entry);
  }
  json doc{{"reports", reports}};

  const fs::path truth = truth_path(ctx);
  if (model && fs::exists(truth)) {
    const GroundTruth gt = truth_from_json(read_text(truth));
    const auto n = get<std::int64_t>(ctx.cfg, "eval.period_check_events");
    const std::size_t end = std::min(splits.test.end, splits.test.begin + static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
    const auto probes =
        collect_period_probes(*model, g, splits.test.begin, end, model->config().length - 1);
    const PeriodCheckReport pc = planted_period_check(probes, gt.periods);
    doc["period_check"] = period_report_json(pc);
    *ctx.out << "planted period check: " << pc.recovered << "/" << pc.evaluated << " = " << std::setprecision(3)
             << pc.fraction << " (chance " << pc.chance_fraction << ")\n";
  }
  fs::create_directories(ctx.out_dir);
  write_text(ctx.out_dir / "eval_report.json", doc.dump(2) + "\n");
  return kExitOk;
}

int cmd_grad_check(const Context& ctx) {
  const auto seed = get<std::uint64_t>(ctx.cfg, "seed");
  bool ok = true;
  json doc;
  for (const CheckResult& c : run_invariant_sweep(seed)) {
    *ctx.out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
    doc["invariants"][c.name] = {{"passed", c.passed}, {"detail", c.detail}};
    if (!c.passed) {
      ok = false;
      *ctx.err << "grad-check: invariant '" << c.name << "' failed: " << c.detail << "\n";
    }
  }
  GradientSuiteOptions opts = default_gradient_suite();
  opts.seeds = get<int>(ctx.cfg, "grad_check.seeds");
  opts.first_seed = seed + 1;
  if (opts.seeds < 1) throw ConfigError("grad_check.seeds must be >= 1");
  const GradientSuiteReport g = run_gradient_suite(opts);
  for (const auto& s : g.seeds) {
    ctx.log() << "  seed " << s.seed << ": max rel err " << std::scientific << std::setprecision(2)
              << s.max_rel_error << " (" << s.worst_parameter << "), " << s.checked << " coords, " << s.excluded
              << " at kinks\n"
              << std::defaultfloat;
  }
  *ctx.out << (g.passed ? "PASS " : "FAIL ") << "gradient_suite  max rel err " << std::scientific
           << std::setprecision(3) << g.max_rel_error << std::defaultfloat << " over " << g.seeds.size()
           << " seeds, " << g.parameter_groups.size() << " parameter groups\n";
  doc["gradient_suite"] = {{"passed", g.passed},
                           {"max_rel_error", g.max_rel_error},
                           {"seeds", g.seeds.size()},
                           {"rejected_seeds", g.rejected_seeds}};
  if (!g.passed) {
    ok = false;
    *ctx.err << "grad-check: gradient_suite failed (max rel err " << g.max_rel_error << ")\n";
  }
  fs::create_directories(ctx.out_dir);
  write_text(ctx.out_dir / "grad_check.json", doc.dump(2) + "\n");
  return ok ? kExitOk : kExitRuntime;
}

int cmd_bench(const Context& ctx) {
  BenchOptions b;
  b.lengths = get<std::vector<Index>>(ctx.cfg, "bench.lengths");
  b.channels = get<Index>(ctx.cfg, "bench.channels");
  b.samples = get<int>(ctx.cfg, "bench.samples");
  b.min_sample_ms = get<double>(ctx.cfg, "bench.min_sample_ms");
  b.seed = get<std::uint64_t>(ctx.cfg, "seed");
  if (b.lengths.empty()) throw ConfigError("bench.lengths must not be empty");
  for (Index L : b.lengths)
    if (L < 1) throw ConfigError("bench.lengths entries must be >= 1");
  if (b.channels < 1) throw ConfigError("bench.channels must be >= 1");
  if (b.samples < 1) throw ConfigError("bench.samples must be >= 1");
  const auto rows = bench_acom(b);
  const std::string csv = bench_to_csv(rows);
  fs::create_directories(ctx.out_dir);
  write_text(ctx.out_dir / "bench_acom.csv", csv);
  *ctx.out << csv;
  return kExitOk;
}

}  // namespace

std::string default_config_json() { return defaults().dump(2); }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TGFormer temporal link prediction"};
  app.require_subcommand(1);
  std::string config_path, output_dir, data_path, checkpoint;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool quiet = false, perfect_oracle = false, print_config = false;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "override a config value, e.g. --set train.max_epochs=3");
  app.add_option("--output-dir", output_dir, "output directory");
  app.add_option("--seed", seed, "global seed");
  app.add_option("--workers", workers, "evaluation threads");
  app.add_option("--data", data_path, "event CSV (data.events)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_flag("--print-config", print_config, "print the effective config and exit");
  app.fallthrough();

  auto* gen = app.add_subcommand("generate", "synthesise a planted-period graph");
  auto* trn = app.add_subcommand("train", "train and write a checkpoint");
  auto* evl = app.add_subcommand("eval", "strategy x regime evaluation of a checkpoint");
  evl->add_option("--checkpoint", checkpoint, "checkpoint path (eval.checkpoint)");
  evl->add_flag("--perfect-oracle", perfect_oracle, "score with the ground-truth oracle (test hook)");
  auto* grd = app.add_subcommand("grad-check", "invariant sweep and finite-difference gradient suite");
  auto* bch = app.add_subcommand("bench-acom", "FFT vs direct autocorrelation timing, CSV");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.quiet = quiet;
  try {
    ctx.cfg = defaults();
    if (!config_path.empty()) {
      json file;
      try {
        file = json::parse(read_text(config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError(config_path + ": " + e.what());
      } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
      }
      merge(ctx.cfg, file, "");
    }
    for (const auto& o : overrides) apply_override(ctx.cfg, o);
    if (seed) ctx.cfg["seed"] = *seed;
    if (workers) ctx.cfg["workers"] = *workers;
    if (!output_dir.empty()) ctx.cfg["output_dir"] = output_dir;
    if (!data_path.empty()) ctx.cfg["data"]["events"] = data_path;
    if (!checkpoint.empty()) ctx.cfg["eval"]["checkpoint"] = checkpoint;
    if (get<int>(ctx.cfg, "workers") < 1) throw ConfigError("workers must be >= 1");
    ctx.out_dir = get<std::string>(ctx.cfg, "output_dir");
    if (print_config) {
      out << ctx.cfg.dump(2) << "\n";
      return kExitOk;
    }

    if (gen->parsed()) return cmd_generate(ctx);
    if (trn->parsed()) return cmd_train(ctx);
    if (evl->parsed()) return cmd_eval(ctx, perfect_oracle);
    if (grd->parsed()) return cmd_grad_check(ctx);
    if (bch->parsed()) return cmd_bench(ctx);
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace tgf
