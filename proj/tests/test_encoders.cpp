#include "support.hpp"

#include <tgf/encoders.hpp>
#include <tgf/grad_check.hpp>

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tgf;
using tgf::testing::ev;

namespace {

struct Fixture {
  ParameterSet set;
  EncoderConfig cfg;
  EncoderParams params;
  explicit Fixture(EncoderConfig c, std::uint64_t seed = 9) : cfg(c) {
    std::mt19937_64 rng(seed);
    params = EncoderParams::create(set, cfg, rng);
  }
};

void zero_biases(ParameterSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i].name.ends_with(".bias")) set[i].value.setZero();
}

Matrix hidden_map(const Matrix& x, const Linear& a, const Linear& b) {
  Matrix h = x * a.weight->value;
  h.rowwise() += a.bias->value.row(0);
  h = h.cwiseMax(0.0);
  Matrix o = h * b.weight->value;
  o.rowwise() += b.bias->value.row(0);
  return o;
}

// Fig. 2: u = 0, b = 1, v = 2, d = 3.
TemporalGraph figure_two() { return TemporalGraph({ev(0, 1, 1.0), ev(2, 1, 1.5), ev(0, 1, 2.0), ev(2, 3, 2.5)}, 4); }

}  // namespace

TEST_CASE("omega starts at one and decreases") {
  for (double alpha : {1.5, 10.0, 1e4})
    for (double beta : {0.5, 1.0, 3.0}) {
      Vector w = time_frequencies(6, alpha, beta);
      CHECK(w(0) == 1.0);
      for (Index i = 1; i < w.size(); ++i) CHECK(w(i) < w(i - 1));
    }
  CHECK(default_alpha(100.0, 8, 1.0) == doctest::Approx(std::pow(100.0, 1.0 / 7.0)));
}

TEST_CASE("time encoding values") {
  TemporalGraph g({ev(0, 1, 1.0)}, 2);
  InteractionSequence s = extract_sequence(g, 0, 3.0, 2);
  Matrix te = encode_time(s, 3.0, time_frequencies(5, 7.0, 2.0));
  CHECK(te.row(1) == Matrix::Ones(1, 5));
  CHECK(te(0, 0) == doctest::Approx(std::cos(2.0)));
  CHECK(te(0, 0) == doctest::Approx(-0.41615).epsilon(1e-4));
  CHECK(te.cwiseAbs().maxCoeff() <= 1.0);

  TemporalGraph g1({ev(0, 1, 1.0)}, 2);
  Matrix one = encode_time(extract_sequence(g1, 0, 2.0, 2), 2.0, time_frequencies(4, 16.0, 2.0));
  CHECK(one(0, 0) == doctest::Approx(std::cos(1.0)));
  CHECK(one(0, 1) == doctest::Approx(std::cos(0.25)));
  CHECK(one(0, 2) == doctest::Approx(std::cos(1.0 / 16)));
  CHECK(one(0, 3) == doctest::Approx(std::cos(1.0 / 64)));
  CHECK_THROWS(encode_time(s, 0.5, time_frequencies(5, 7.0, 2.0)));
}

TEST_CASE("worked co-occurrence example") {
  TemporalGraph g = figure_two();
  InteractionSequence su = extract_sequence(g, 0, 3.0, 3);
  InteractionSequence sv = extract_sequence(g, 2, 3.0, 3);
  REQUIRE(su.neighbors == std::vector<NodeId>{1, 1, 0});
  REQUIRE(sv.neighbors == std::vector<NodeId>{1, 3, 2});
  auto [fu, fv] = count_frequencies(su, sv);
  // Rows run oldest first, so the printed example reads bottom-up.
  FrequencyCounts eu(3, 2), evv(3, 2);
  eu << 2, 1, 2, 1, 1, 0;
  evv << 2, 1, 0, 1, 0, 1;
  CHECK(fu == eu);
  CHECK(fv == evv);
}

TEST_CASE("co-occurrence symmetry and disjointness") {
  TemporalGraph g({ev(0, 1, 1.0), ev(0, 2, 2.0), ev(3, 4, 1.0), ev(3, 5, 2.0)}, 6);
  InteractionSequence a = extract_sequence(g, 0, 3.0, 4);
  InteractionSequence b = extract_sequence(g, 3, 3.0, 4);
  auto [fa, fb] = count_frequencies(a, b);
  CHECK(fa.col(1).isZero());
  CHECK(fb.col(0).isZero());
  CHECK(fa(0, 0) == 0);  // PAD row
  auto [s1, s2] = count_frequencies(a, a);
  CHECK(s1.col(0) == s1.col(1));
  CHECK(s1 == s2);
  for (Index i = 1; i < 4; ++i) CHECK(s1(i, 0) >= 1);
}

TEST_CASE("self-loop toggle drops the anchor from the tally") {
  TemporalGraph g = figure_two();
  InteractionSequence su = extract_sequence(g, 0, 3.0, 3);
  InteractionSequence sv = extract_sequence(g, 2, 3.0, 3);
  auto [fu, fv] = count_frequencies(su, sv, false);
  CHECK(fu(2, 0) == 0);
  CHECK(fu(0, 0) == 2);
}

TEST_CASE("absent features with bias-free maps encode to zero") {
  EncoderConfig cfg;
  cfg.edge_raw_dim = 2;
  Fixture fx(cfg);
  zero_biases(fx.set);
  TemporalGraph g({ev(0, 1, 1.0), ev(0, 1, 2.0)}, 2, 2);
  Tape tape;
  auto [node, edge] = encode_node_edge(tape, g, extract_sequence(g, 0, 3.0, 4), fx.params);
  CHECK(node.value().isZero());
  CHECK(edge.value().isZero());
}

TEST_CASE("identity edge map reproduces raw features") {
  EncoderConfig cfg;
  cfg.edge_raw_dim = 3;
  cfg.d_edge = 3;
  Fixture fx(cfg);
  zero_biases(fx.set);
  fx.params.edge_hidden.weight->value = Matrix::Identity(3, 3);
  fx.params.edge_out.weight->value = Matrix::Identity(3, 3);
  std::vector<Event> evs;
  for (int i = 0; i < 3; ++i) {
    RowVector f(3);
    f << 0.5 * i, 1.0 + i, 2.0;
    evs.push_back(Event{0, 1, 1.0 + i, f});
  }
  TemporalGraph g(evs, 2, 3);
  InteractionSequence s = extract_sequence(g, 0, 5.0, 4);
  Tape tape;
  Var edge = encode_node_edge(tape, g, s, fx.params).second;
  CHECK(edge.value() == s.edge_features);
}

TEST_CASE("node and edge maps match direct arithmetic") {
  EncoderConfig cfg;
  cfg.node_raw_dim = 3;
  cfg.edge_raw_dim = 2;
  Fixture fx(cfg, 21);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  std::vector<Event> evs;
  for (int i = 0; i < 6; ++i) evs.push_back(Event{0, 1 + i % 3, 1.0 + i, RowVector::NullaryExpr(2, [&] { return n(rng); })});
  TemporalGraph g(evs, 4, 2);
  g.set_node_features(Matrix::NullaryExpr(4, 3, [&] { return n(rng); }));
  InteractionSequence s = extract_sequence(g, 0, 10.0, 5);
  Tape tape;
  auto [node, edge] = encode_node_edge(tape, g, s, fx.params);
  Matrix raw(5, 3);
  for (Index i = 0; i < 5; ++i) raw.row(i) = g.node_features().row(s.neighbors[static_cast<std::size_t>(i)]);
  CHECK((node.value() - hidden_map(raw, fx.params.node_hidden, fx.params.node_out)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((edge.value() - hidden_map(s.edge_features, fx.params.edge_hidden, fx.params.edge_out)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("frequency encoding: zero, swap symmetry, direct oracle") {
  EncoderConfig cfg;
  Fixture fx(cfg, 31);
  FrequencyCounts c(5, 2);
  c << 1, 0, 2, 1, 3, 3, 0, 2, 5, 1;
  FrequencyCounts swapped(5, 2);
  swapped.col(0) = c.col(1);
  swapped.col(1) = c.col(0);
  Tape tape;
  Var a = encode_frequency(tape, c, fx.params);
  Var b = encode_frequency(tape, swapped, fx.params);
  CHECK(a.value() == b.value());
  const Matrix direct = hidden_map(c.col(0).cast<double>(), fx.params.freq_hidden, fx.params.freq_out) +
                        hidden_map(c.col(1).cast<double>(), fx.params.freq_hidden, fx.params.freq_out);
  CHECK((a.value() - direct).cwiseAbs().maxCoeff() < 1e-12);

  zero_biases(fx.set);
  Var z = encode_frequency(tape, FrequencyCounts::Zero(5, 2), fx.params);
  CHECK(z.value().isZero());
}

TEST_CASE("align_concat shape, zero map, block linearity") {
  EncoderConfig cfg;
  cfg.d = 2;
  cfg.d_node = 3;
  cfg.d_edge = 3;
  cfg.d_time = 4;
  cfg.d_freq = 2;
  Fixture fx(cfg, 41);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n;
  auto rnd = [&](Index r, Index c) { return Matrix(Matrix::NullaryExpr(r, c, [&] { return n(rng); })); };
  Tape tape;
  const Matrix N = rnd(3, 3), E = rnd(3, 3), T = rnd(3, 4), F = rnd(3, 2);
  EncodedSequence x = align_concat(tape, tape.constant(N), tape.constant(E), tape.constant(T), tape.constant(F), fx.params);
  CHECK(x.values.rows() == 3);
  CHECK(x.values.cols() == 8);

  zero_biases(fx.set);
  EncodedSequence base =
      align_concat(tape, tape.constant(N), tape.constant(E), tape.constant(T), tape.constant(F), fx.params);
  EncodedSequence twice =
      align_concat(tape, tape.constant(N), tape.constant(E), tape.constant(2.0 * T), tape.constant(F), fx.params);
  const Matrix diff = twice.values.value() - base.values.value();
  CHECK(diff.leftCols(4).isZero());
  CHECK(diff.rightCols(2).isZero());
  CHECK((diff.middleCols(4, 2) - base.values.value().middleCols(4, 2)).cwiseAbs().maxCoeff() < 1e-12);

  EncodedSequence zero = align_concat(tape, tape.constant(Matrix::Zero(3, 3)), tape.constant(Matrix::Zero(3, 3)),
                                      tape.constant(Matrix::Zero(3, 4)), tape.constant(Matrix::Zero(3, 2)), fx.params);
  CHECK(zero.values.value().isZero());
  CHECK_THROWS_AS(align_concat(tape, tape.constant(T), tape.constant(E), tape.constant(N), tape.constant(F), fx.params),
                  ShapeError);
}

TEST_CASE("align_concat block order is fixed") {
  EncoderConfig cfg;
  cfg.d = 2;
  cfg.d_node = cfg.d_edge = cfg.d_time = cfg.d_freq = 2;
  Fixture fx(cfg, 51);
  Matrix a(1, 2), b(1, 2), c(1, 2), d(1, 2);
  a << 1, 0;
  b << 0, 1;
  c << 1, 1;
  d << -1, 2;
  Tape tape;
  Var ref = align_concat(tape, tape.constant(a), tape.constant(b), tape.constant(c), tape.constant(d), fx.params).values;
  Var swapped =
      align_concat(tape, tape.constant(b), tape.constant(a), tape.constant(c), tape.constant(d), fx.params).values;
  CHECK(ref.value() != swapped.value());
  // Golden output for seed 51; any change to block order or init breaks it.
  Matrix golden(1, 8);
  golden << -0.18466521442875949, -0.62865221928895565, -1.0788310837404933, -0.11225738209206182,
      -1.9823679072015201, 0.78518834626569967, -0.77711991461774588, -2.6502622661446109;
  CHECK((ref.value() - golden).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encoder gradients match finite differences") {
  EncoderConfig cfg;
  cfg.node_raw_dim = 2;
  cfg.edge_raw_dim = 2;
  cfg.d = 3;
  cfg.d_node = cfg.d_edge = cfg.d_time = cfg.d_freq = 3;
  Fixture fx(cfg, 61);
  std::mt19937_64 rng(62);
  std::normal_distribution<double> n;
  std::vector<Event> evs;
  for (int i = 0; i < 5; ++i) evs.push_back(Event{0, 1 + i % 2, 1.0 + i, RowVector::NullaryExpr(2, [&] { return n(rng); })});
  TemporalGraph g(evs, 3, 2);
  g.set_node_features(Matrix::NullaryExpr(3, 2, [&] { return n(rng); }));
  InteractionSequence su = extract_sequence(g, 0, 9.0, 4);
  InteractionSequence sv = extract_sequence(g, 1, 9.0, 4);
  auto counts = count_frequencies(su, sv).first;
  const Matrix w = Matrix::NullaryExpr(4, 12, [&] { return n(rng); });
  auto loss = [&](Tape& t) {
    EncodedSequence x = encode_sequence(t, g, su, counts, fx.params);
    return sum(mul(x.values, t.constant(w)));
  };
  auto reports = grad_check_parameters(fx.set.pointers(), loss, {1e-4, 1e-4});
  CHECK(reports.size() == fx.set.size());
  for (const auto& [name, rep] : reports) {
    INFO(name);
    CHECK(rep.passed);
  }
}
