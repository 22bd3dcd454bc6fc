#include "tgf/acom.hpp"

#include "tgf/fft.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace tgf {

Index AcomConfig::raw_top_k() const {
  return static_cast<Index>(std::floor(c * std::log(static_cast<double>(length))));
}

Index AcomConfig::top_k() const { return std::clamp<Index>(raw_top_k(), 1, std::max<Index>(length, 1)); }

void AcomConfig::validate() const {
  if (heads < 1) throw std::invalid_argument("acom: heads must be >= 1");
  if (model_width < 1) throw std::invalid_argument("acom: model width must be >= 1");
  if (model_width % heads != 0)
    throw std::invalid_argument("acom: model width " + std::to_string(model_width) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  if (!(c > 0.0)) throw std::invalid_argument("acom: c must be positive");
  if (length < 1) throw std::invalid_argument("acom: sequence length must be >= 1");
}

namespace {

void check_pair(const char* op, const Matrix& q, const Matrix& k) {
  if (q.rows() != k.rows() || q.cols() != k.cols())
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(q) + " and " + shape_string(k));
  if (q.rows() == 0) throw ShapeError(std::string(op) + ": empty series");
}

using Spectrum = ComplexSpectrum<double>;

// Column-summed cross spectrum a^ . conj(b^), as a single column.
Spectrum summed_cross_spectrum(const Spectrum& a, const Spectrum& b) {
  Spectrum s = a.cwiseProduct(b.conjugate()).rowwise().sum();
  return s;
}

}  // namespace

Vector autocorrelation_scores(const Matrix& q, const Matrix& k) {
  check_pair("autocorrelation_scores", q, k);
  using Complex = std::complex<double>;
  const Index L = q.rows();
  const auto n = static_cast<std::size_t>(L);
  const Index bins = L / 2 + 1;
  const auto& plan = fft_detail::plan_for<double>(n);
  // Channels go through two at a time and only the channel-summed cross
  // spectrum is kept, so scratch stays O(L) however wide Q is. The scratch
  // is reused across calls; fresh buffers per call cost page faults at
  // large L whenever the allocator hands memory back to the OS.
  thread_local std::vector<Complex> bq, bk, cross;
  bq.resize(n);
  bk.resize(n);
  cross.assign(static_cast<std::size_t>(bins), Complex(0.0));
  // a * conj(b), spelled out to stay off the slow std::complex multiply.
  auto mul_conj = [](const Complex& a, const Complex& b) {
    return Complex(a.real() * b.real() + a.imag() * b.imag(), a.imag() * b.real() - a.real() * b.imag());
  };
  for (Index c = 0; c < q.cols(); c += 2) {
    const bool pair = c + 1 < q.cols();
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Index>(plan.source(i));
      bq[i] = Complex(q(r, c), pair ? q(r, c + 1) : 0.0);
      bk[i] = Complex(k(r, c), pair ? k(r, c + 1) : 0.0);
    }
    plan.transform_loaded(bq.data(), false);
    plan.transform_loaded(bk.data(), false);
    for (std::size_t j = 0; j < cross.size(); ++j) {
      const std::size_t m = j == 0 ? 0 : n - j;
      // Split z = x + i y back into the spectra of x and y.
      const Complex zq = bq[j], zqm = std::conj(bq[m]);
      const Complex zk = bk[j], zkm = std::conj(bk[m]);
      const Complex q1 = 0.5 * (zq + zqm), k1 = 0.5 * (zk + zkm);
      const Complex dq = zq - zqm, dk = zk - zkm;
      const Complex q2(0.5 * dq.imag(), -0.5 * dq.real()), k2(0.5 * dk.imag(), -0.5 * dk.real());
      cross[j] += mul_conj(q1, k1) + mul_conj(q2, k2);
    }
  }
  // Inverse of the Hermitian extension; DC and Nyquist are real in exact arithmetic.
  cross[0] = Complex(cross[0].real(), 0.0);
  if (n % 2 == 0) cross[n / 2] = Complex(cross[n / 2].real(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = plan.source(i);
    bq[i] = j < cross.size() ? cross[j] : std::conj(cross[n - j]);
  }
  plan.transform_loaded(bq.data(), true);
  Vector out(L);
  const double scale = 1.0 / (static_cast<double>(L) * static_cast<double>(L));
  for (std::size_t i = 0; i < n; ++i) out(static_cast<Index>(i)) = bq[i].real() * scale;
  return out;
}

Vector autocorrelation_scores_direct(const Matrix& q, const Matrix& k) {
  check_pair("autocorrelation_scores_direct", q, k);
  const Index L = q.rows();
  Vector out = Vector::Zero(L);
  for (Index d = 0; d < L; ++d) {
    double acc = 0.0;
    for (Index i = 0; i < L; ++i) acc += q.row(i).dot(k.row((i - d + L) % L));
    out(d) = acc / static_cast<double>(L);
  }
  return out;
}

Var autocorrelation_scores(const Var& q, const Var& k) {
  check_pair("autocorrelation_scores", q.value(), k.value());
  if (q.tape() != k.tape()) throw std::logic_error("autocorrelation_scores: operands on different tapes");
  Tape& tape = *q.tape();
  const Index L = q.rows();
  Spectrum fq = rfft(q.value());
  Spectrum fk = rfft(k.value());
  Matrix out = (irfft<double>(summed_cross_spectrum(fq, fk), L).col(0) / static_cast<double>(L)).transpose();
  const auto iq = q.id(), ik = k.id();
  return tape.record(std::move(out), {q, k}, [iq, ik, L, fq, fk](Tape& tp, std::size_t self) {
    // score(d) = (1/L) sum_i q(i) k(i - d):
    //   dq = (1/L) g (*) k  (circular convolution)
    //   dk = (1/L) corr(q, g)
    const Spectrum fg = rfft(Matrix(tp.grad(self).transpose()));
    const double inv = 1.0 / static_cast<double>(L);
    if (tp.requires_grad(iq)) {
      Spectrum s = fk.array().colwise() * fg.col(0).array();
      tp.accumulate(iq, irfft<double>(s, L) * inv);
    }
    if (tp.requires_grad(ik)) {
      Spectrum s = fq.array().colwise() * fg.col(0).conjugate().array();
      tp.accumulate(ik, irfft<double>(s, L) * inv);
    }
  });
}

DelaySelection select_delays(const Vector& scores, Index k) {
  const Index L = scores.size();
  if (L < 1) throw std::invalid_argument("select_delays: empty score vector");
  DelaySelection sel;
  if (k < 1 || k > L) {
    sel.clamped = true;
    k = std::clamp<Index>(k, 1, L);
  }
  std::vector<Index> order(static_cast<std::size_t>(L));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  sel.delays.assign(order.begin(), order.begin() + k);
  Vector raw(k);
  for (Index i = 0; i < k; ++i) raw(i) = scores(sel.delays[static_cast<std::size_t>(i)]);
  const double m = raw.maxCoeff();
  sel.weights = (raw.array() - m).exp().matrix();
  sel.weights /= sel.weights.sum();
  return sel;
}

DelaySelection select_delays(const Vector& scores, const AcomConfig& cfg) {
  DelaySelection sel = select_delays(scores, cfg.raw_top_k());
  return sel;
}

Matrix time_delay_aggregate(const Matrix& v, const DelaySelection& sel) {
  Matrix out = Matrix::Zero(v.rows(), v.cols());
  for (std::size_t i = 0; i < sel.delays.size(); ++i) {
    if (sel.delays[i] < 0 || sel.delays[i] >= v.rows())
      throw std::invalid_argument("time_delay_aggregate: delay " + std::to_string(sel.delays[i]) +
                                  " outside [0, " + std::to_string(v.rows()) + ")");
    out += sel.weights(static_cast<Index>(i)) * roll(v, sel.delays[i]);
  }
  return out;
}

Var time_delay_aggregate(const Var& v, const std::vector<Index>& delays, const Var& weights) {
  if (weights.rows() != 1 || weights.cols() != static_cast<Index>(delays.size()))
    throw ShapeError("time_delay_aggregate: weights " + shape_string(weights.value()) + " do not match " +
                     std::to_string(delays.size()) + " delays");
  if (delays.empty()) throw std::invalid_argument("time_delay_aggregate: no delays");
  Var out;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (delays[i] < 0 || delays[i] >= v.rows())
      throw std::invalid_argument("time_delay_aggregate: delay " + std::to_string(delays[i]) + " outside [0, " +
                                  std::to_string(v.rows()) + ")");
    Var term = scale(roll(v, delays[i]), slice_cols(weights, static_cast<Index>(i), 1));
    out = out.valid() ? add(out, term) : term;
  }
  return out;
}

namespace {

bool same_node(const Var& a, const Var& b) { return a.tape() == b.tape() && a.id() == b.id(); }

// With Q = K the scores satisfy R(d) = R(L - d) exactly; rounding in the
// spectral route would otherwise break those ties arbitrarily.
Vector symmetrized(const Vector& s) {
  const Index L = s.size();
  Vector out = s;
  for (Index d = 1; d < L; ++d) out(d) = 0.5 * (s(d) + s(L - d));
  return out;
}

Var head_impl(const Var& q, const Var& k, const Var& v, const AcomConfig& cfg, bool self_correlation,
              AcomTrace* trace) {
  Var scores = autocorrelation_scores(q, k);
  Vector values = scores.value().row(0).transpose();
  if (self_correlation) values = symmetrized(values);
  DelaySelection sel = select_delays(values, cfg);
  // Selection indices are constants; gradient flows through the gathered
  // scores and the rolled values only.
  Var weights = softmax(gather_cols(scores, sel.delays), 1);
  Var out = time_delay_aggregate(v, sel.delays, weights);
  if (trace != nullptr) {
    trace->heads.push_back(std::move(sel));
    trace->scores.push_back(values);
  }
  return out;
}

}  // namespace

Var acom_head(const Var& q, const Var& k, const Var& v, const AcomConfig& cfg, AcomTrace* trace) {
  return head_impl(q, k, v, cfg, same_node(q, k), trace);
}

Var acom_multihead(const Var& q, const Var& k, const Var& v, const AcomConfig& cfg, const Var& w_out,
                   AcomTrace* trace) {
  cfg.validate();
  if (q.cols() != cfg.model_width || k.cols() != cfg.model_width || v.cols() != cfg.model_width)
    throw ShapeError("acom_multihead: inputs must have " + std::to_string(cfg.model_width) + " channels, got " +
                     shape_string(q.value()));
  if (w_out.rows() != cfg.model_width || w_out.cols() != cfg.model_width)
    throw ShapeError("acom_multihead: output projection must be square of width " +
                     std::to_string(cfg.model_width) + ", got " + shape_string(w_out.value()));
  const Index width = cfg.model_width / cfg.heads;
  const bool self_correlation = same_node(q, k);
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg.heads));
  for (Index h = 0; h < cfg.heads; ++h) {
    heads.push_back(head_impl(slice_cols(q, h * width, width), slice_cols(k, h * width, width),
                              slice_cols(v, h * width, width), cfg, self_correlation, trace));
  }
  Var joined = cfg.heads == 1 ? heads.front() : concat(heads, 1);
  return matmul(joined, w_out);
}

}  // namespace tgf
