#include "tgf/model.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tgf {

void ModelConfig::validate() const {
  if (length < 2) throw std::invalid_argument("model: length must be >= 2 (readout needs an event row)");
  if (d < 1 || d_node < 1 || d_edge < 1 || d_time < 1 || d_freq < 1)
    throw std::invalid_argument("model: widths must be >= 1");
  if (layers < 1) throw std::invalid_argument("model: layers must be >= 1");
  if (heads < 1 || width() % heads != 0)
    throw std::invalid_argument("model: 4d = " + std::to_string(width()) + " must be divisible by heads = " +
                                std::to_string(heads));
  if (!(c > 0.0)) throw std::invalid_argument("model: c must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("model: beta must be positive");
  if (node_raw_dim < 0 || edge_raw_dim < 0) throw std::invalid_argument("model: raw feature widths must be >= 0");
}

TGFormerModel::TGFormerModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (!(config_.alpha > 0.0)) throw std::invalid_argument("model: alpha must be resolved to a positive value");
  std::mt19937_64 rng(seed);
  EncoderConfig ec;
  ec.node_raw_dim = config_.node_raw_dim;
  ec.edge_raw_dim = config_.edge_raw_dim;
  ec.d = config_.d;
  ec.d_node = config_.d_node;
  ec.d_edge = config_.d_edge;
  ec.d_time = config_.d_time;
  ec.d_freq = config_.d_freq;
  ec.alpha = config_.alpha;
  ec.beta = config_.beta;
  ec.count_self_loop = config_.count_self_loop;
  encoder_ = EncoderParams::create(params_, ec, rng);

  const Index w = config_.width();
  for (Index j = 0; j < config_.layers; ++j) {
    const std::string prefix = "layer" + std::to_string(j);
    SeriesLayerParams layer;
    layer.acom = AcomConfig{config_.heads, w, config_.c, config_.length};
    layer.ln_acom = LayerNorm::create(params_, prefix + ".ln_acom", w);
    layer.w_out = &params_.add(prefix + ".acom.w_out", glorot(w, w, rng));
    layer.ln_ffn = LayerNorm::create(params_, prefix + ".ln_ffn", w);
    layer.ffn_in = Linear::create(params_, prefix + ".ffn.in", w, w, rng);
    layer.ffn_out = Linear::create(params_, prefix + ".ffn.out", w, w, rng);
    layers_.push_back(layer);
  }
  readout_ = &params_.add("readout.weight", glorot(2 * w, 1, rng));
  predictor_.hidden = Linear::create(params_, "predictor.hidden", 2 * w, config_.hidden(), rng);
  predictor_.out = Linear::create(params_, "predictor.out", config_.hidden(), 2, rng);
}

Var series_layer(Tape& tape, const Var& z, const SeriesLayerParams& layer, AcomTrace* trace) {
  Var normed = layer.ln_acom(tape, z);
  Var attended = acom_multihead(normed, normed, normed, layer.acom, tape.parameter(*layer.w_out), trace);
  Var mid = add(attended, z);
  Var ffn = layer.ffn_out(tape, relu(layer.ffn_in(tape, layer.ln_ffn(tape, mid))));
  return add(ffn, mid);
}

Var adaptive_readout(Tape& tape, const Var& h, const std::vector<bool>& pad_mask, Parameter& weight,
                     SequenceTrace* trace) {
  const Index L = h.rows();
  const Index w = h.cols();
  if (L < 2) throw ShapeError("adaptive_readout: need at least 2 rows, got " + shape_string(h.value()));
  if (weight.value.rows() != 2 * w || weight.value.cols() != 1)
    throw ShapeError("adaptive_readout: weight " + shape_string(weight.value) + " does not match width " +
                     std::to_string(w));
  if (!pad_mask.empty() && static_cast<Index>(pad_mask.size()) != L)
    throw ShapeError("adaptive_readout: pad mask length does not match rows");

  std::vector<Index> rows;
  for (Index l = 0; l + 1 < L; ++l)
    if (pad_mask.empty() || !pad_mask[static_cast<std::size_t>(l)]) rows.push_back(l);
  Var anchor = slice_rows(h, L - 1, 1);
  if (trace != nullptr) {
    trace->readout_rows = rows;
    trace->readout_weights.resize(0);
  }
  if (rows.empty()) return anchor;

  Var wa = tape.parameter(weight);
  Var events = gather_rows(h, rows);
  Var logits = add_row(matmul(events, slice_rows(wa, w, w)), matmul(anchor, slice_rows(wa, 0, w)));
  Var lambda = softmax(logits, 0);
  if (trace != nullptr) trace->readout_weights = lambda.value().col(0);
  return add(anchor, matmul(transpose(lambda), events));
}

Var represent(Tape& tape, const TGFormerModel& model, const TemporalGraph& g, const InteractionSequence& seq,
              const FrequencyCounts& counts, SequenceTrace* trace) {
  EncodedSequence enc = encode_sequence(tape, g, seq, counts, model.encoder());
  Var z = enc.values;
  for (const auto& layer : model.layers()) {
    AcomTrace* lt = nullptr;
    if (trace != nullptr) lt = &trace->layers.emplace_back();
    z = series_layer(tape, z, layer, lt);
  }
  return adaptive_readout(tape, z, enc.pad_mask, model.readout_weight(), trace);
}

std::pair<Var, Var> forward(Tape& tape, const TGFormerModel& model, const TemporalGraph& g, NodeId u, NodeId v,
                            double t, PairTrace* trace) {
  const Index L = model.config().length;
  InteractionSequence su = extract_sequence(g, u, t, L);
  InteractionSequence sv = extract_sequence(g, v, t, L);
  auto [fu, fv] = count_frequencies(su, sv, model.config().count_self_loop);
  Var hu = represent(tape, model, g, su, fu, trace != nullptr ? &trace->u : nullptr);
  Var hv = represent(tape, model, g, sv, fv, trace != nullptr ? &trace->v : nullptr);
  return {hu, hv};
}

Var predict_link(Tape& tape, const Var& h_u, const Var& h_v, const PredictorParams& predictor) {
  if (h_u.rows() != 1 || h_v.rows() != 1 || h_u.cols() + h_v.cols() != predictor.hidden.in())
    throw ShapeError("predict_link: representations " + shape_string(h_u.value()) + " and " +
                     shape_string(h_v.value()) + " do not match the predictor");
  Var joined = concat({h_u, h_v}, 1);
  Var logits = predictor.out(tape, relu(predictor.hidden(tape, joined)));
  return slice_cols(softmax(logits, 1), 1, 1);
}

Var bce_loss(std::span<const Var> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("bce_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw std::invalid_argument("bce_loss: empty batch");
  Tape& tape = *predictions.front().tape();
  Var y = clamp(concat(predictions, 1), kProbabilityClamp, 1.0 - kProbabilityClamp);
  Matrix lab(1, static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) lab(0, static_cast<Index>(i)) = labels[i];
  Var pos = tape.constant(lab);
  Var neg = tape.constant(Matrix::Ones(1, lab.cols()) - lab);
  Var one_minus = sub(tape.constant(Matrix::Ones(1, lab.cols())), y);
  Var ll = add(mul(pos, log(y)), mul(neg, log(one_minus)));
  return scale(sum(ll), -1.0);
}

double bce_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("bce_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return loss;
}

double score_pair(const TGFormerModel& model, const TemporalGraph& g, NodeId u, NodeId v, double t) {
  Tape tape(false);
  auto [hu, hv] = forward(tape, model, g, u, v, t);
  return predict_link(tape, hu, hv, model.predictor()).scalar();
}

// ---------------------------------------------------------------------------

using nlohmann::json;

std::string config_to_json(const ModelConfig& c) {
  json j = {{"length", c.length},
            {"d", c.d},
            {"d_node", c.d_node},
            {"d_edge", c.d_edge},
            {"d_time", c.d_time},
            {"d_freq", c.d_freq},
            {"heads", c.heads},
            {"layers", c.layers},
            {"c", c.c},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"predictor_hidden", c.predictor_hidden},
            {"node_raw_dim", c.node_raw_dim},
            {"edge_raw_dim", c.edge_raw_dim},
            {"count_self_loop", c.count_self_loop}};
  return j.dump(2);
}

ModelConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.length = j.at("length").get<Index>();
  c.d = j.at("d").get<Index>();
  c.d_node = j.at("d_node").get<Index>();
  c.d_edge = j.at("d_edge").get<Index>();
  c.d_time = j.at("d_time").get<Index>();
  c.d_freq = j.at("d_freq").get<Index>();
  c.heads = j.at("heads").get<Index>();
  c.layers = j.at("layers").get<Index>();
  c.c = j.at("c").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.predictor_hidden = j.at("predictor_hidden").get<Index>();
  c.node_raw_dim = j.at("node_raw_dim").get<Index>();
  c.edge_raw_dim = j.at("edge_raw_dim").get<Index>();
  c.count_self_loop = j.at("count_self_loop").get<bool>();
  return c;
}

namespace {

constexpr char kCkptMagic[8] = {'T', 'G', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kCkptVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::filesystem::path sidecar(const std::filesystem::path& p) { return p.string() + ".json"; }

}  // namespace

void save_checkpoint(const TGFormerModel& model, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kCkptMagic, 8);
    put_u64(out, kCkptVersion);
    const ParameterSet& ps = model.parameters();
    put_u64(out, ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Parameter& p = ps[i];
      put_u64(out, p.name.size());
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put_u64(out, static_cast<std::uint64_t>(p.value.rows()));
      put_u64(out, static_cast<std::uint64_t>(p.value.cols()));
      for (Index r = 0; r < p.value.rows(); ++r)
        for (Index c = 0; c < p.value.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(p.value(r, c)));
    }
  }
  std::ofstream cfg(sidecar(path), std::ios::binary);
  if (!cfg) throw std::runtime_error("cannot write " + sidecar(path).string());
  cfg << config_to_json(model.config()) << "\n";
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream in(sidecar(path), std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint config " + sidecar(path).string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void load_checkpoint(TGFormerModel& model, const std::filesystem::path& path) {
  const ModelConfig stored = read_checkpoint_config(path);
  if (!(stored == model.config()))
    throw std::runtime_error("checkpoint config does not match the model config:\n" + config_to_json(stored));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic");
  if (get_u64(in) != kCkptVersion) throw std::runtime_error("checkpoint: unsupported version");
  ParameterSet& ps = model.parameters();
  const auto count = get_u64(in);
  if (count != ps.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = get_u64(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("checkpoint: truncated");
    Parameter* p = ps.find(name);
    if (p == nullptr) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
    const auto rows = static_cast<Index>(get_u64(in));
    const auto cols = static_cast<Index>(get_u64(in));
    if (rows != p->value.rows() || cols != p->value.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) p->value(r, c) = std::bit_cast<double>(get_u64(in));
  }
}

}  // namespace tgf
