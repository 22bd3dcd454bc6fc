#pragma once

// Parameter ownership and the few layer shapes the model is built from.

#include "tgf/array.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tgf {

/// Owns parameters at stable addresses, in registration order.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  std::vector<Parameter*> pointers();

  void zero_grad();
  Index scalar_count() const;

  /// Copies values (not gradients) from another set with identical names/shapes.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// x W + b with W stored as (in x out).
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& set, const std::string& name, Index in, Index out, std::mt19937_64& rng);
  Var operator()(Tape& tape, const Var& x) const;
  Index in() const { return weight->value.rows(); }
  Index out() const { return weight->value.cols(); }
};

/// Row-wise layer normalisation with learned gain and shift.
struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;
  double eps = 1e-5;

  static LayerNorm create(ParameterSet& set, const std::string& name, Index width);
  Var operator()(Tape& tape, const Var& x) const;
};

/// Glorot-uniform initialisation.
Matrix glorot(Index in, Index out, std::mt19937_64& rng);

}  // namespace tgf
