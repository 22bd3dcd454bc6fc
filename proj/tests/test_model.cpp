#include "support.hpp"

#include <tgf/model.hpp>

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tgf;
using tgf::testing::ev;
using tgf::testing::TempDir;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.length = 8;
  c.d = 4;
  c.d_node = c.d_edge = c.d_time = c.d_freq = 4;
  c.heads = 2;
  c.layers = 1;
  c.alpha = 5.0;
  return c;
}

TemporalGraph toy(std::uint64_t seed, int events = 40, NodeId nodes = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<NodeId> node(0, nodes - 1);
  std::uniform_real_distribution<double> t(0.5, 20.0);
  std::vector<Event> evs;
  for (int i = 0; i < events; ++i) evs.push_back(ev(node(rng), node(rng), t(rng)));
  return TemporalGraph(evs, static_cast<std::size_t>(nodes));
}

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Matrix::NullaryExpr(r, c, [&] { return n(rng); });
}

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = tiny();
  c.layers = 0;
  CHECK_THROWS(c.validate());
  c = tiny();
  c.heads = 3;
  CHECK_THROWS(c.validate());
  c = tiny();
  c.alpha = 0.0;
  CHECK_THROWS(TGFormerModel(c, 1));
}

TEST_CASE("zeroed output projections make a series layer the identity") {
  for (Index L : {3, 8, 13}) {
    ModelConfig c = tiny();
    c.length = L;
    TGFormerModel m(c, 3);
    const SeriesLayerParams& layer = m.layers()[0];
    layer.w_out->value.setZero();
    layer.ffn_out.weight->value.setZero();
    layer.ffn_out.bias->value.setZero();
    std::mt19937_64 rng(4);
    Tape tape;
    Var z = tape.constant(randn(L, c.width(), rng));
    Var out = series_layer(tape, z, layer);
    CHECK(out.value() == z.value());
  }
}

TEST_CASE("series layer equals a hand-composed oracle") {
  TGFormerModel m(tiny(), 5);
  const SeriesLayerParams& layer = m.layers()[0];
  std::mt19937_64 rng(6);
  Tape tape;
  Var z = tape.constant(randn(8, 16, rng));
  Var got = series_layer(tape, z, layer);

  auto ln = [&](const Matrix& x, const LayerNorm& p) {
    Tape t;
    return Matrix((layer_norm(t.constant(x), p.eps).value().array().rowwise() * p.gain->value.row(0).array())
                      .rowwise() +
                  p.shift->value.row(0).array());
  };
  const Matrix n1 = ln(z.value(), layer.ln_acom);
  AcomConfig single = layer.acom;
  single.heads = 1;
  single.model_width = 8;
  Matrix heads(8, 16);
  for (Index h = 0; h < 2; ++h) {
    const Matrix part = n1.middleCols(8 * h, 8);
    Vector s = autocorrelation_scores(part, part);
    Vector sym = s;
    for (Index d = 1; d < 8; ++d) sym(d) = 0.5 * (s(d) + s(8 - d));
    DelaySelection sel = select_delays(sym, single);
    // Ranking uses the mirrored scores, weights the raw ones.
    Vector raw(static_cast<Index>(sel.delays.size()));
    for (std::size_t i = 0; i < sel.delays.size(); ++i) raw(Index(i)) = s(sel.delays[i]);
    sel.weights = (raw.array() - raw.maxCoeff()).exp();
    sel.weights /= sel.weights.sum();
    heads.middleCols(8 * h, 8) = time_delay_aggregate(part, sel);
  }
  const Matrix mid = heads * layer.w_out->value + z.value();
  Matrix hidden = ln(mid, layer.ln_ffn) * layer.ffn_in.weight->value;
  hidden.rowwise() += layer.ffn_in.bias->value.row(0);
  Matrix ffn = hidden.cwiseMax(0.0) * layer.ffn_out.weight->value;
  ffn.rowwise() += layer.ffn_out.bias->value.row(0);
  CHECK(max_abs(got.value() - (ffn + mid)) < 1e-12);
}

TEST_CASE("readout examples") {
  Parameter w("w", Matrix::Zero(8, 1));
  std::mt19937_64 rng(7);
  SUBCASE("single event row") {
    Tape tape;
    const Matrix h = randn(2, 4, rng);
    SequenceTrace tr;
    Var out = adaptive_readout(tape, tape.constant(h), {false, false}, w, &tr);
    CHECK(tr.readout_weights.size() == 1);
    CHECK(tr.readout_weights(0) == 1.0);
    CHECK(max_abs(out.value() - (h.row(1) + h.row(0))) < 1e-15);
  }
  SUBCASE("zero weight gives equal lambdas over non-pad rows") {
    Tape tape;
    const Matrix h = randn(5, 4, rng);
    SequenceTrace tr;
    Var out = adaptive_readout(tape, tape.constant(h), {true, false, false, false, false}, w, &tr);
    CHECK(tr.readout_rows == std::vector<Index>{1, 2, 3});
    for (Index i = 0; i < 3; ++i) CHECK(tr.readout_weights(i) == doctest::Approx(1.0 / 3));
    CHECK(max_abs(out.value() - (h.row(4) + h.middleRows(1, 3).colwise().mean())) < 1e-12);
  }
  SUBCASE("random weight matches the formula") {
    w.value = randn(8, 1, rng);
    Tape tape;
    const Matrix h = randn(6, 4, rng);
    Var out = adaptive_readout(tape, tape.constant(h), {}, w);
    Vector logits(5);
    for (Index l = 0; l < 5; ++l) logits(l) = h.row(5).dot(w.value.col(0).head(4)) + h.row(l).dot(w.value.col(0).tail(4));
    Vector lam = (logits.array() - logits.maxCoeff()).exp();
    lam /= lam.sum();
    RowVector ref = h.row(5);
    for (Index l = 0; l < 5; ++l) ref += lam(l) * h.row(l);
    CHECK(max_abs(out.value() - ref) < 1e-12);
  }
}

TEST_CASE("forward shapes and same-node symmetry") {
  TemporalGraph g = toy(8);
  for (Index layers : {1, 2}) {
    ModelConfig c = tiny();
    c.layers = layers;
    TGFormerModel m(c, 9);
    Tape tape;
    auto [hu, hv] = forward(tape, m, g, 2, 2, 25.0);
    CHECK(hu.rows() == 1);
    CHECK(hu.cols() == 16);
    CHECK(hu.value() == hv.value());
  }
}

TEST_CASE("one-layer forward equals the encoder, layer, readout composition") {
  TemporalGraph g = toy(10);
  TGFormerModel m(tiny(), 11);
  Tape tape;
  auto [hu, hv] = forward(tape, m, g, 1, 3, 25.0);
  InteractionSequence su = extract_sequence(g, 1, 25.0, 8), sv = extract_sequence(g, 3, 25.0, 8);
  auto [fu, fv] = count_frequencies(su, sv);
  Tape t2;
  EncodedSequence enc = encode_sequence(t2, g, sv, fv, m.encoder());
  Var z = series_layer(t2, enc.values, m.layers()[0]);
  Var h = adaptive_readout(t2, z, enc.pad_mask, m.readout_weight());
  CHECK(h.value() == hv.value());
}

TEST_CASE("predictor closed forms") {
  TGFormerModel m(tiny(), 12);
  const PredictorParams& p = m.predictor();
  p.out.weight->value.setZero();
  std::mt19937_64 rng(13);
  const Matrix u = randn(1, 16, rng), v = randn(1, 16, rng);
  // A tape binds each parameter once, so each bias setting gets its own tape.
  auto prob = [&] {
    Tape tape;
    return predict_link(tape, tape.constant(u), tape.constant(v), p).scalar();
  };
  p.out.bias->value << 0.0, 0.0;
  CHECK(prob() == doctest::Approx(0.5));
  p.out.bias->value << 0.0, 10.0;
  CHECK(prob() == doctest::Approx(0.9999546).epsilon(1e-7));
}

TEST_CASE("predictor matches a two-affine softmax oracle") {
  TGFormerModel m(tiny(), 14);
  const PredictorParams& p = m.predictor();
  std::mt19937_64 rng(15);
  Tape tape;
  const Matrix u = randn(1, 16, rng), v = randn(1, 16, rng);
  const double got = predict_link(tape, tape.constant(u), tape.constant(v), p).scalar();
  Matrix x(1, 32);
  x << u, v;
  Matrix h = (x * p.hidden.weight->value + p.hidden.bias->value).cwiseMax(0.0);
  Matrix lo = h * p.out.weight->value + p.out.bias->value;
  CHECK(std::abs(got - 1.0 / (1.0 + std::exp(lo(0, 0) - lo(0, 1)))) < 1e-12);
}

TEST_CASE("binary cross-entropy") {
  std::vector<double> half{0.5}, one{1.0};
  CHECK(bce_loss(half, one) == doctest::Approx(std::log(2.0)));
  std::vector<double> perfect{1.0, 0.0}, labels{1.0, 0.0};
  CHECK(bce_loss(perfect, labels) == doctest::Approx(-2.0 * std::log(1.0 - kProbabilityClamp)));

  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Tape tape;
  std::vector<Var> preds;
  std::vector<double> p, y{1, 0, 0, 1};
  double ref = 0.0;
  for (int i = 0; i < 4; ++i) {
    p.push_back(u(rng));
    preds.push_back(tape.constant(Matrix::Constant(1, 1, p.back())));
    ref -= y[std::size_t(i)] * std::log(p.back()) + (1 - y[std::size_t(i)]) * std::log(1 - p.back());
  }
  CHECK(std::abs(bce_loss(preds, y).scalar() - ref) < 1e-12);
  CHECK(std::abs(bce_loss(p, y) - ref) < 1e-12);
}

TEST_CASE("checkpoints round-trip and reject a different config") {
  TempDir dir("ckpt");
  TGFormerModel a(tiny(), 17);
  save_checkpoint(a, dir / "m.bin");
  TGFormerModel b(tiny(), 18);
  load_checkpoint(b, dir / "m.bin");
  for (std::size_t i = 0; i < a.parameters().size(); ++i) CHECK(a.parameters()[i].value == b.parameters()[i].value);
  CHECK(read_checkpoint_config(dir / "m.bin") == tiny());

  ModelConfig other = tiny();
  other.d = 2;
  other.d_node = other.d_edge = other.d_time = other.d_freq = 2;
  TGFormerModel c(other, 19);
  CHECK_THROWS(load_checkpoint(c, dir / "m.bin"));
  CHECK_THROWS(load_checkpoint(b, dir / "missing.bin"));
}
