#pragma once

// Dense reverse-mode differentiation on Eigen matrices.
//
// Every value is a 2-D row-major-semantics matrix (vectors are 1xN rows).
// Operations record onto a Tape; Tape::backward replays them in reverse
// creation order, which is a valid topological order because a node can only
// reference nodes created before it.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace tgf {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Matrix& m);

/// A named trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Lightweight handle to a node on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  /// With grad disabled, parameters bind as constants and nothing records a
  /// backward rule.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Leaf bound to an external parameter; backward accumulates into p.grad.
  /// Binding the same parameter twice returns the same leaf.
  Var parameter(Parameter& p);
  bool grad_enabled() const { return grad_enabled_; }

  /// Record a derived node. `backward` is skipped when no parent needs grad.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates. The tape is consumed: a
  /// second call throws.
  void backward(const Var& loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += g;
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* sink = nullptr;
  };

  static void ensure_grad(Node& n) {
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    else if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols())
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }

  void check_owned(const Var& v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. All take and return Vars on the same tape.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (R x C) + row (1 x C) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var mul(const Var& a, const Var& b);  ///< elementwise
/// a (R x C) * row (1 x C) elementwise, broadcast over rows.
Var mul_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
/// a * s where s is a 1x1 Var.
Var scale(const Var& a, const Var& s);
Var relu(const Var& a);
Var log(const Var& a);
Var clamp(const Var& a, double lo, double hi);
/// axis = 1: normalise each row; axis = 0: each column.
Var softmax(const Var& a, int axis = 1);
/// Per-row normalisation to zero mean, unit variance (no affine part).
Var layer_norm(const Var& a, double eps = 1e-5);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice_rows(const Var& a, Index begin, Index count);
Var slice_cols(const Var& a, Index begin, Index count);
/// Picks rows by index (repeats allowed); adjoint is scatter-add.
Var gather_rows(const Var& a, std::span<const Index> rows);
/// Picks columns of a row vector by index.
Var gather_cols(const Var& a, std::span<const Index> cols);
/// Circular shift along rows: out(i, :) = a((i + delta) mod R, :).
Var roll(const Var& a, Index delta);
Var sum(const Var& a);           ///< 1x1
Var sum(const Var& a, int axis);  ///< axis 0 -> 1xC, axis 1 -> Rx1
Var mean(const Var& a, int axis);
Var transpose(const Var& a);

/// Value-level roll with the same convention as the Var overload.
Matrix roll(const Matrix& a, Index delta);

}  // namespace tgf
