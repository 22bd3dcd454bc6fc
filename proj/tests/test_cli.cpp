#include "support.hpp"

#include <tgf/cli.hpp>
#include <tgf/model.hpp>

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace tgf;
using tgf::testing::TempDir;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tgformer");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// About 200 events: 18 active pairs x 10 slots plus 20 noise events.
const std::vector<std::string> kToy{"--set", "synth.nodes=20",      "--set", "synth.periods=[5.0]",
                                    "--set", "synth.duration=50.0", "--set", "synth.pair_density=0.2",
                                    "--set", "synth.noise_events=20", "--quiet"};

const std::vector<std::string> kTinyModel{"--set", "model.length=8",   "--set", "model.d=4",
                                          "--set", "model.d_node=4",   "--set", "model.d_edge=4",
                                          "--set", "model.d_time=4",   "--set", "model.d_freq=4",
                                          "--set", "train.max_epochs=3", "--set", "train.patience=2",
                                          "--set", "train.learning_rate=0.001", "--set", "train.batch_size=50"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("generate writes deterministic outputs") {
  TempDir a("gen_a"), b("gen_b");
  Run r1 = cli(with({"generate", "--output-dir", a.path().string()}, kToy));
  Run r2 = cli(with({"generate", "--output-dir", b.path().string()}, kToy));
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  const std::string csv = slurp(a / "events.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') > 1);
  CHECK(csv == slurp(b / "events.csv"));
  CHECK(slurp(a / "ground_truth.json") == slurp(b / "ground_truth.json"));
}

TEST_CASE("configuration errors exit with code 2") {
  TempDir d("cfg");
  Run bad = cli({"generate", "--output-dir", d.path().string(), "--set", "synth.nodes=0"});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("nodes") != std::string::npos);

  CHECK(cli({"generate", "--set", "synth.bogus=1"}).code == kExitConfig);
  CHECK(cli({"generate", "--set", "synth.nodes=1.5"}).code == kExitConfig);
  CHECK(cli({"no-such-command"}).code == kExitConfig);
  CHECK(cli({"train", "--data", (d / "missing.csv").string()}).code == kExitConfig);
  CHECK(cli({"eval", "--data", (d / "missing.csv").string()}).code == kExitConfig);
}

TEST_CASE("print-config reflects overrides") {
  Run r = cli({"generate", "--print-config", "--set", "train.max_epochs=7"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["train"]["max_epochs"] == 7);
  CHECK(json::parse(default_config_json())["train"]["max_epochs"] == 100);
}

TEST_CASE("train then eval on a toy graph") {
  TempDir d("train");
  const std::string out = d.path().string();
  REQUIRE(cli(with({"generate", "--output-dir", out}, kToy)).code == 0);
  Run tr = cli(with(with({"train", "--output-dir", out}, kToy), kTinyModel));
  INFO(tr.err);
  REQUIRE(tr.code == 0);

  const std::string log = slurp(d / "epoch_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  const ModelConfig mc = read_checkpoint_config(d / "checkpoint.bin");
  TGFormerModel m(mc, 0);
  CHECK_NOTHROW(load_checkpoint(m, d / "checkpoint.bin"));

  Run ev = cli(with({"eval", "--output-dir", out}, kToy));
  INFO(ev.err);
  REQUIRE(ev.code == 0);
  const json report = json::parse(slurp(d / "eval_report.json"));
  int scored = 0;
  for (const auto& r : report["reports"]) {
    if (r.contains("skipped")) continue;
    ++scored;
    for (const char* key : {"ap", "auc_roc", "strategy", "regime", "n_samples"}) CHECK(r.contains(key));
  }
  CHECK(scored >= 3);
  CHECK(report.contains("period_check"));

  Run oracle = cli(with({"eval", "--perfect-oracle", "--output-dir", out}, kToy));
  REQUIRE(oracle.code == 0);
  for (const auto& r : json::parse(slurp(d / "eval_report.json"))["reports"]) {
    if (r.contains("skipped")) continue;
    CHECK(r["ap"] == 1.0);
    CHECK(r["auc_roc"] == 1.0);
  }
}

TEST_CASE("eval without a checkpoint exits with code 2") {
  TempDir d("nockpt");
  const std::string out = d.path().string();
  REQUIRE(cli(with({"generate", "--output-dir", out}, kToy)).code == 0);
  Run r = cli(with({"eval", "--output-dir", out}, kToy));
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("checkpoint") != std::string::npos);
}

TEST_CASE("grad-check passes on the default tiny config") {
  TempDir d("grad");
  Run r = cli({"grad-check", "--output-dir", d.path().string(), "--quiet"});
  INFO(r.out << r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("max rel err") != std::string::npos);
  CHECK(json::parse(slurp(d / "grad_check.json"))["gradient_suite"]["passed"] == true);
}

TEST_CASE("bench-acom prints one row per length and mechanism") {
  TempDir d("bench");
  Run r = cli({"bench-acom", "--output-dir", d.path().string(), "--set", "bench.lengths=[16,32,64]", "--set",
               "bench.samples=2", "--set", "bench.min_sample_ms=1.0", "--quiet"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "L,mechanism,mean_ns,stddev_ns");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
  }
  CHECK(rows == 6);
}
