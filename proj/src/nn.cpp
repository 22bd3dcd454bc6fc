#include "tgf/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tgf {

Parameter& ParameterSet::add(std::string name, Matrix value) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::vector<Parameter*> ParameterSet::pointers() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Index ParameterSet::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw std::logic_error("copy_values_from: parameter count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    Parameter& dst = *params_[i];
    const Parameter& src = other[i];
    if (dst.name != src.name || dst.value.rows() != src.value.rows() || dst.value.cols() != src.value.cols())
      throw std::logic_error("copy_values_from: parameter '" + dst.name + "' does not match");
    dst.value = src.value;
  }
}

Matrix glorot(Index in, Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Index>(in + out, 1)));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(in, out);
  for (Index r = 0; r < in; ++r)
    for (Index c = 0; c < out; ++c) w(r, c) = dist(rng);
  return w;
}

Linear Linear::create(ParameterSet& set, const std::string& name, Index in, Index out, std::mt19937_64& rng) {
  Linear l;
  l.weight = &set.add(name + ".weight", glorot(in, out, rng));
  l.bias = &set.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  return add_row(matmul(x, tape.parameter(*weight)), tape.parameter(*bias));
}

LayerNorm LayerNorm::create(ParameterSet& set, const std::string& name, Index width) {
  LayerNorm ln;
  ln.gain = &set.add(name + ".gain", Matrix::Ones(1, width));
  ln.shift = &set.add(name + ".shift", Matrix::Zero(1, width));
  return ln;
}

Var LayerNorm::operator()(Tape& tape, const Var& x) const {
  return add_row(mul_row(layer_norm(x, eps), tape.parameter(*gain)), tape.parameter(*shift));
}

}  // namespace tgf
