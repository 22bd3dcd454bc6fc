#include "support.hpp"

#include <tgf/graph.hpp>
#include <tgf/sampling.hpp>

#include <doctest.h>

#include <fstream>

using namespace tgf;
using tgf::testing::ev;
using tgf::testing::TempDir;

TEST_CASE("ingest sorts rows by timestamp") {
  TemporalGraph g = ingest_csv_text("src,dst,ts\na,b,5\nb,c,1\nc,a,3\n");
  REQUIRE(g.size() == 3);
  CHECK(g.event(0).timestamp == 1.0);
  CHECK(g.event(1).timestamp == 3.0);
  CHECK(g.event(2).timestamp == 5.0);
  CHECK(g.node_count() == 3);
}

TEST_CASE("ingest without feature columns leaves features absent") {
  TemporalGraph g = ingest_csv_text("src,dst,ts\n1,2,1\n2,3,2\n");
  CHECK(g.edge_feature_dim() == 0);
  for (const Event& e : g.events()) CHECK(e.features.size() == 0);
  CHECK(g.edge_features(0).size() == 0);
}

TEST_CASE("equal timestamps keep file order") {
  TemporalGraph g = ingest_csv_text("src,dst,ts\nx,y,2\np,q,2\nr,s,1\n");
  const auto& ids = g.raw_ids();
  REQUIRE(g.size() == 3);
  CHECK(ids[static_cast<std::size_t>(g.event(1).src)] == "x");
  CHECK(ids[static_cast<std::size_t>(g.event(2).src)] == "p");
}

TEST_CASE("ingest reports the offending line") {
  CHECK_THROWS_WITH_AS(ingest_csv_text("src,dst,ts\na,b,1\na,b,-2\n"), doctest::Contains("line 3"), DataError);
  CHECK_THROWS_WITH_AS(ingest_csv_text("src,dst,ts\na,b,1\na,b\n"), doctest::Contains("line 3"), DataError);
  CHECK_THROWS_WITH_AS(ingest_csv_text("src,dst,ts\na,b,zz\n"), doctest::Contains("line 2"), DataError);
  CHECK_THROWS_AS(ingest_csv_text(""), DataError);
}

TEST_CASE("graph constructor rejects negative timestamps and bad ids") {
  CHECK_THROWS_AS(TemporalGraph({ev(0, 1, -1.0)}, 2), DataError);
  CHECK_THROWS_AS(TemporalGraph({ev(0, 5, 1.0)}, 2), DataError);
}

TEST_CASE("feature columns round-trip through csv and the binary cache") {
  TemporalGraph g = ingest_csv_text("src,dst,ts,f0,f1\na,b,1,0.5,-1\nb,c,2,2,3\n");
  CHECK(g.edge_feature_dim() == 2);
  CHECK(g.edge_features(1)(1) == 3.0);

  TempDir dir("graph");
  write_csv(g, dir / "g.csv");
  TemporalGraph back = ingest_csv(dir / "g.csv");
  REQUIRE(back.size() == g.size());
  CHECK(back.edge_features(0) == g.edge_features(0));

  write_event_cache(g, dir / "g.bin");
  TemporalGraph cached = read_event_cache(dir / "g.bin");
  REQUIRE(cached.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(cached.event(i).src == g.event(i).src);
    CHECK(cached.event(i).dst == g.event(i).dst);
    CHECK(cached.event(i).timestamp == g.event(i).timestamp);
    CHECK(cached.edge_features(i) == g.edge_features(i));
  }
}

TEST_CASE("empty history is all padding before the self-loop") {
  TemporalGraph g({ev(1, 2, 1.0)}, 3);
  InteractionSequence s = extract_sequence(g, 0, 5.0, 4);
  REQUIRE(s.length() == 4);
  CHECK(s.pad == std::vector<bool>{true, true, true, false});
  CHECK(s.neighbors[3] == 0);
  CHECK(s.timestamps(3) == 5.0);
  CHECK(s.neighbors[0] == 3);
}

TEST_CASE("long history keeps the most recent L-1 events") {
  std::vector<Event> evs;
  for (int i = 0; i < 10; ++i) evs.push_back(ev(0, 1 + i % 3, 1.0 + i));
  TemporalGraph g(evs, 4);
  InteractionSequence s = extract_sequence(g, 0, 20.0, 4);
  CHECK(s.real_count() == 4);
  CHECK(s.timestamps(0) == 8.0);
  CHECK(s.timestamps(1) == 9.0);
  CHECK(s.timestamps(2) == 10.0);
  CHECK(s.timestamps(3) == 20.0);
}

TEST_CASE("repeated neighbours are retained") {
  // u = 0, b = 1
  TemporalGraph g({ev(0, 1, 1.0), ev(0, 1, 2.0)}, 2);
  InteractionSequence s = extract_sequence(g, 0, 3.0, 3);
  CHECK(s.neighbors == std::vector<NodeId>{1, 1, 0});
  CHECK(s.timestamps(0) == 1.0);
  CHECK(s.timestamps(1) == 2.0);
  CHECK(s.timestamps(2) == 3.0);
}

TEST_CASE("history excludes events at or after the query time") {
  TemporalGraph g({ev(0, 1, 1.0), ev(0, 2, 3.0)}, 3);
  InteractionSequence s = extract_sequence(g, 0, 3.0, 3);
  CHECK(s.pad == std::vector<bool>{true, false, false});
  CHECK(s.neighbors[1] == 1);
}

TEST_CASE("chronological split boundaries") {
  auto line = [](int n) {
    std::vector<Event> evs;
    for (int i = 0; i < n; ++i) evs.push_back(ev(0, 1, 1.0 + i));
    return TemporalGraph(evs, 2);
  };
  Splits s = chronological_split(line(100));
  CHECK(s.train.begin == 0);
  CHECK(s.train.end == 70);
  CHECK(s.val.end == 85);
  CHECK(s.test.end == 100);

  TemporalGraph g10 = line(10);
  Splits t = chronological_split(g10);
  CHECK(t.train.end == 7);
  CHECK(t.val.end == 8);
  CHECK(t.test.end == 10);
  CHECK(g10.event(t.train.end - 1).timestamp <= g10.event(t.test.begin).timestamp);
}

// ---------------------------------------------------------------------------

TEST_CASE("random negatives stay within the node range") {
  TemporalGraph g({ev(0, 1, 1.0)}, 5);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    NegativeSample n = sample_negative(g, NegativeStrategy::random, g.event(0), {}, rng);
    CHECK(n.src == 0);
    CHECK(n.dst >= 0);
    CHECK(n.dst < 5);
  }
}

TEST_CASE("historical negative is the only admissible past pair") {
  TemporalGraph g({ev(0, 1, 1.0), ev(2, 3, 1.0)}, 4);
  EdgeSet past{{0, 1}, {2, 3}};
  EdgeSet current{{0, 1}};
  NegativeContext ctx;
  ctx.past_edges = &past;
  ctx.current_edges = &current;
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    NegativeSample n = sample_negative(g, NegativeStrategy::historical, g.event(0), ctx, rng);
    CHECK(n.src == 2);
    CHECK(n.dst == 3);
    CHECK_FALSE(n.fallback);
  }
}

TEST_CASE("inductive negative lands on the training complement") {
  TemporalGraph g({ev(0, 1, 1.0)}, 5);
  EdgeSet train;
  for (NodeId s = 0; s < 5; ++s)
    for (NodeId d = 0; d < 5; ++d)
      if (!(s == 4 && d == 2)) train.insert(s, d);
  NegativeContext ctx;
  ctx.train_edges = &train;
  Rng rng(5);
  NegativeSample n = sample_negative(g, NegativeStrategy::inductive, g.event(0), ctx, rng);
  CHECK(n.src == 4);
  CHECK(n.dst == 2);
  CHECK_FALSE(n.fallback);
}

TEST_CASE("historical sampling without a pool falls back") {
  TemporalGraph g({ev(0, 1, 1.0)}, 3);
  Rng rng(1);
  NegativeSample n = sample_negative(g, NegativeStrategy::historical, g.event(0), {}, rng);
  CHECK(n.fallback);
}

TEST_CASE("strategy names parse") {
  CHECK(parse_strategy("historical") == NegativeStrategy::historical);
  CHECK(to_string(NegativeStrategy::inductive) == "inductive");
  CHECK_THROWS(parse_strategy("bogus"));
}
