#include "tgf/array.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tgf {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << ", " << m.cols() << "]";
  return os.str();
}

namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw std::logic_error("operation on an unbound Var");
  return *v.tape();
}

Tape& common_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::logic_error("operands live on different tapes");
  return tape_of(a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Var

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): expected [1, 1], got " + shape_string(v));
  return v(0, 0);
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check_owned(const Var& v) const {
  if (v.tape() != this) throw std::logic_error("Var does not belong to this tape");
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), grad_enabled_, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  if (!grad_enabled_) {
    nodes_.push_back(Node{p.value, Matrix(), false, nullptr, nullptr});
  } else {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
    nodes_.push_back(Node{p.value, Matrix(), true, nullptr, &p});
  }
  bound_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    check_owned(p);
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) shape_fail("accumulate", n.value, g);
  ensure_grad(n);
  n.grad += g;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (consumed_) throw std::logic_error("backward(): tape already consumed");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw ShapeError("backward(): loss must be scalar, got " + shape_string(lv));
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink != nullptr) n.sink->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Primitives

Var matmul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate_expr(ib, tp.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate(ib, tp.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("sub", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate_expr(ib, -tp.grad(self));
  });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = common_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) shape_fail("add_row", a.value(), row.value());
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [ia, ir](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    if (tp.requires_grad(ir)) tp.accumulate_expr(ir, tp.grad(self).colwise().sum());
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g.cwiseProduct(tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate_expr(ib, g.cwiseProduct(tp.value(ia)));
  });
}

Var mul_row(const Var& a, const Var& row) {
  Tape& t = common_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) shape_fail("mul_row", a.value(), row.value());
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return t.record(std::move(out), {a, row}, [ia, ir](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia))
      tp.accumulate_expr(ia, (g.array().rowwise() * tp.value(ir).row(0).array()).matrix());
    if (tp.requires_grad(ir)) tp.accumulate_expr(ir, g.cwiseProduct(tp.value(ia)).colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record(a.value() * s, {a}, [ia, s](Tape& tp, std::size_t self) {
    tp.accumulate_expr(ia, tp.grad(self) * s);
  });
}

Var scale(const Var& a, const Var& s) {
  Tape& t = common_tape(a, s);
  if (s.value().size() != 1) shape_fail("scale", a.value(), s.value());
  const auto ia = a.id(), is = s.id();
  return t.record(a.value() * s.value()(0, 0), {a, s}, [ia, is](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate_expr(ia, g * tp.value(is)(0, 0));
    if (tp.requires_grad(is)) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(ia)).sum();
      tp.accumulate(is, gs);
    }
  });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record(a.value().cwiseMax(0.0), {a}, [ia](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    tp.accumulate_expr(ia, tp.grad(self).cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var log(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record(a.value().array().log().matrix(), {a}, [ia](Tape& tp, std::size_t self) {
    tp.accumulate_expr(ia, tp.grad(self).cwiseQuotient(tp.value(ia)));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.record(std::move(out), {a}, [ia, lo, hi](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    Matrix pass = ((x.array() >= lo) && (x.array() <= hi)).cast<double>().matrix();
    tp.accumulate_expr(ia, tp.grad(self).cwiseProduct(pass));
  });
}

Var softmax(const Var& a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  Tape& t = tape_of(a);
  const auto ia = a.id();
  // Work on rows; transpose in and out for axis 0.
  Matrix x = axis == 1 ? a.value() : Matrix(a.value().transpose());
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  Matrix out = axis == 1 ? y : Matrix(y.transpose());
  return t.record(std::move(out), {a}, [ia, axis](Tape& tp, std::size_t self) {
    Matrix s = axis == 1 ? tp.value(self) : Matrix(tp.value(self).transpose());
    Matrix g = axis == 1 ? tp.grad(self) : Matrix(tp.grad(self).transpose());
    // dx = s * (g - <g, s>)
    Matrix dx(s.rows(), s.cols());
    for (Index r = 0; r < s.rows(); ++r) {
      const double dot = g.row(r).dot(s.row(r));
      dx.row(r) = s.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    if (axis == 1) tp.accumulate(ia, dx);
    else tp.accumulate_expr(ia, dx.transpose());
  });
}

Var layer_norm(const Var& a, double eps) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  const Matrix& x = a.value();
  const Index n = x.cols();
  if (n == 0) throw ShapeError("layer_norm: zero-width input " + shape_string(x));
  Matrix y(x.rows(), n);
  Vector inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = ((x.row(r).array() - mu) * inv_std(r)).matrix();
  }
  return t.record(y, {a}, [ia, inv_std, n](Tape& tp, std::size_t self) {
    const Matrix& yv = tp.value(self);
    const Matrix& g = tp.grad(self);
    Matrix dx(yv.rows(), yv.cols());
    for (Index r = 0; r < yv.rows(); ++r) {
      const double gm = g.row(r).mean();
      const double gy = g.row(r).dot(yv.row(r)) / static_cast<double>(n);
      dx.row(r) = (inv_std(r) * (g.row(r).array() - gm - yv.row(r).array() * gy)).matrix();
    }
    tp.accumulate(ia, dx);
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  Tape& t = tape_of(parts.front());
  const Matrix& first = parts.front().value();
  Index total = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::logic_error("concat: operands live on different tapes");
    if (axis == 1 && p.rows() != first.rows()) shape_fail("concat(axis=1)", first, p.value());
    if (axis == 0 && p.cols() != first.cols()) shape_fail("concat(axis=0)", first, p.value());
    total += axis == 1 ? p.cols() : p.rows();
  }
  Matrix out = axis == 1 ? Matrix(first.rows(), total) : Matrix(total, first.cols());
  std::vector<std::pair<std::size_t, Index>> spans;  // (id, width)
  Index off = 0;
  for (const Var& p : parts) {
    const Index w = axis == 1 ? p.cols() : p.rows();
    if (axis == 1) out.middleCols(off, w) = p.value();
    else out.middleRows(off, w) = p.value();
    spans.emplace_back(p.id(), w);
    off += w;
  }
  return t.record(std::move(out), parts, [spans, axis](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Index o = 0;
    for (const auto& [id, w] : spans) {
      if (tp.requires_grad(id)) {
        if (axis == 1) tp.accumulate_expr(id, g.middleCols(o, w));
        else tp.accumulate_expr(id, g.middleRows(o, w));
      }
      o += w;
    }
  });
}

Var slice_rows(const Var& a, Index begin, Index count) {
  Tape& t = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of bounds for " + shape_string(a.value()));
  const auto ia = a.id();
  return t.record(a.value().middleRows(begin, count), {a}, [ia, begin, count](Tape& tp, std::size_t self) {
    Matrix g = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
    g.middleRows(begin, count) = tp.grad(self);
    tp.accumulate(ia, g);
  });
}

Var slice_cols(const Var& a, Index begin, Index count) {
  Tape& t = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of bounds for " + shape_string(a.value()));
  const auto ia = a.id();
  return t.record(a.value().middleCols(begin, count), {a}, [ia, begin, count](Tape& tp, std::size_t self) {
    Matrix g = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
    g.middleCols(begin, count) = tp.grad(self);
    tp.accumulate(ia, g);
  });
}

Var gather_rows(const Var& a, std::span<const Index> rows) {
  Tape& t = tape_of(a);
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows())
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(a.value()));
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  const auto ia = a.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {a}, [ia, idx](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix ga = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Index>(i));
    tp.accumulate(ia, ga);
  });
}

Var gather_cols(const Var& a, std::span<const Index> cols) {
  Tape& t = tape_of(a);
  Matrix out(a.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || cols[i] >= a.cols())
      throw ShapeError("gather_cols: index " + std::to_string(cols[i]) + " out of range for " +
                       shape_string(a.value()));
    out.col(static_cast<Index>(i)) = a.value().col(cols[i]);
  }
  const auto ia = a.id();
  std::vector<Index> idx(cols.begin(), cols.end());
  return t.record(std::move(out), {a}, [ia, idx](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix ga = Matrix::Zero(tp.value(ia).rows(), tp.value(ia).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.col(idx[i]) += g.col(static_cast<Index>(i));
    tp.accumulate(ia, ga);
  });
}

Matrix roll(const Matrix& a, Index delta) {
  const Index n = a.rows();
  if (n == 0) return a;
  const Index d = ((delta % n) + n) % n;
  Matrix out(n, a.cols());
  // out(i) = a((i + d) mod n)
  out.topRows(n - d) = a.bottomRows(n - d);
  out.bottomRows(d) = a.topRows(d);
  return out;
}

Var roll(const Var& a, Index delta) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record(roll(a.value(), delta), {a}, [ia, delta](Tape& tp, std::size_t self) {
    tp.accumulate(ia, roll(tp.grad(self), -delta));
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0);
    tp.accumulate_expr(ia, Matrix::Constant(tp.value(ia).rows(), tp.value(ia).cols(), g));
  });
}

Var sum(const Var& a, int axis) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  if (axis == 0) {
    return t.record(a.value().colwise().sum(), {a}, [ia](Tape& tp, std::size_t self) {
      tp.accumulate_expr(ia, tp.grad(self).replicate(tp.value(ia).rows(), 1));
    });
  }
  if (axis == 1) {
    return t.record(a.value().rowwise().sum(), {a}, [ia](Tape& tp, std::size_t self) {
      tp.accumulate_expr(ia, tp.grad(self).replicate(1, tp.value(ia).cols()));
    });
  }
  throw std::invalid_argument("sum: axis must be 0 or 1");
}

Var mean(const Var& a, int axis) {
  const Index n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) throw ShapeError("mean: empty axis in " + shape_string(a.value()));
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  const auto ia = a.id();
  return t.record(a.value().transpose(), {a}, [ia](Tape& tp, std::size_t self) {
    tp.accumulate_expr(ia, tp.grad(self).transpose());
  });
}

}  // namespace tgf
