#pragma once

// Real-input FFT along the row (time) axis of an Eigen matrix.
//
// Convention: unnormalised forward transform, 1/L on the inverse, so
// irfft(rfft(x), L) == x. Power-of-two lengths use an iterative radix-2
// kernel; other lengths go through Bluestein's chirp-z on a power-of-two
// kernel, keeping O(L log L) for every L.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace tgf {

template <typename Scalar>
using ComplexSpectrum = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

namespace fft_detail {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename Scalar>
class Radix2 {
 public:
  using Complex = std::complex<Scalar>;

  explicit Radix2(std::size_t n) : n_(n), rev_(n) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = static_cast<std::uint32_t>(r);
    }
    // Stage-major table: the twiddles of stage `len` sit contiguously at
    // offset half - 1, so the inner loop reads them sequentially.
    twiddle_.resize(n > 1 ? n - 1 : 0);
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      for (std::size_t j = 0; j < half; ++j) {
        const Scalar angle = -Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(j) / Scalar(len);
        twiddle_[half - 1 + j] = Complex(std::cos(angle), std::sin(angle));
      }
    }
  }

  /// In-place forward transform (inverse = conjugated twiddles, unscaled).
  void transform(Complex* data, bool inverse) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(data[i], data[rev_[i]]);
    butterflies(data, inverse);
  }

  /// Transform of input already stored in bit-reversed order (see source()).
  void butterflies(Complex* data, bool inverse) const {
    // Early stages run block by block so each block stays in L1; only the
    // last few stages sweep the whole buffer.
    const std::size_t block = std::min(n_, kBlock);
    for (std::size_t base = 0; base < n_; base += block) sweep(data + base, block, 2, block, inverse);
    sweep(data, n_, 2 * block, n_, inverse);
  }

  std::size_t size() const { return n_; }
  std::size_t source(std::size_t i) const { return rev_[i]; }

 private:
  static constexpr std::size_t kBlock = 1024;

  // Stages first..last, two at a time where possible: half the passes over memory.
  void sweep(Complex* data, std::size_t count, std::size_t first, std::size_t last, bool inverse) const {
    std::size_t len = first;
    for (; 2 * len <= last; len <<= 2) stage_pair(data, count, len, inverse);
    if (len <= last) stage(data, count, len, inverse);
  }

  // Butterfly b <- a - w b, a <- a + w b with the multiply written out:
  // std::complex operator* takes the slow NaN-recovery path unless the
  // build uses fast-math.
  static void butterfly(Complex& a, Complex& b, Complex w, bool inverse) {
    const Scalar wr = w.real();
    const Scalar wi = inverse ? -w.imag() : w.imag();
    const Scalar vr = b.real() * wr - b.imag() * wi;
    const Scalar vi = b.real() * wi + b.imag() * wr;
    const Scalar ur = a.real(), ui = a.imag();
    a = Complex(ur + vr, ui + vi);
    b = Complex(ur - vr, ui - vi);
  }

  // Stages len and 2 len fused; same arithmetic as running them one after the other.
  void stage_pair(Complex* data, std::size_t count, std::size_t len, bool inverse) const {
    const std::size_t half = len / 2;
    const Complex* tw = twiddle_.data() + (half - 1);
    const Complex* tw2 = twiddle_.data() + (len - 1);
    for (std::size_t start = 0; start < count; start += 2 * len) {
      for (std::size_t j = 0; j < half; ++j) {
        Complex* p = data + start + j;
        Complex a0 = p[0], a1 = p[half], a2 = p[len], a3 = p[len + half];
        butterfly(a0, a1, tw[j], inverse);
        butterfly(a2, a3, tw[j], inverse);
        butterfly(a0, a2, tw2[j], inverse);
        butterfly(a1, a3, tw2[j + half], inverse);
        p[0] = a0;
        p[half] = a1;
        p[len] = a2;
        p[len + half] = a3;
      }
    }
  }

  void stage(Complex* data, std::size_t count, std::size_t len, bool inverse) const {
    const std::size_t half = len / 2;
    const Complex* tw = twiddle_.data() + (half - 1);
    for (std::size_t start = 0; start < count; start += len) {
      for (std::size_t j = 0; j < half; ++j) butterfly(data[start + j], data[start + j + half], tw[j], inverse);
    }
  }

  std::size_t n_;
  std::vector<std::uint32_t> rev_;
  std::vector<Complex> twiddle_;
};

template <typename Scalar>
class Plan {
 public:
  using Complex = std::complex<Scalar>;

  explicit Plan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("fft: length must be >= 1");
    if (is_pow2(n)) {
      kernel_ = std::make_unique<Radix2<Scalar>>(n);
      return;
    }
    const std::size_t m = next_pow2(2 * n - 1);
    kernel_ = std::make_unique<Radix2<Scalar>>(m);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle small for large k.
      const std::size_t k2 = (k * k) % (2 * n);
      const Scalar angle = -std::numbers::pi_v<Scalar> * Scalar(k2) / Scalar(n);
      chirp_[k] = Complex(std::cos(angle), std::sin(angle));
    }
    chirp_filter_.assign(m, Complex(0));
    chirp_filter_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      chirp_filter_[k] = std::conj(chirp_[k]);
      chirp_filter_[m - k] = std::conj(chirp_[k]);
    }
    kernel_->transform(chirp_filter_.data(), false);
    scratch_.resize(m);
  }

  /// Unnormalised DFT, forward (e^{-i...}) or inverse (e^{+i...}).
  void transform(Complex* data, bool inverse) const {
    if (chirp_.empty()) {
      kernel_->transform(data, inverse);
      return;
    }
    const std::size_t m = kernel_->size();
    auto& a = scratch_;
    std::fill(a.begin(), a.end(), Complex(0));
    // Inverse DFT == conj(forward DFT of conj(x)).
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex x = inverse ? std::conj(data[k]) : data[k];
      a[k] = x * chirp_[k];
    }
    kernel_->transform(a.data(), false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= chirp_filter_[k];
    kernel_->transform(a.data(), true);
    const Scalar inv_m = Scalar(1) / Scalar(m);
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex y = a[k] * inv_m * chirp_[k];
      data[k] = inverse ? std::conj(y) : y;
    }
  }

  /// Input sample that buffer position i must hold before transform_loaded().
  /// Gathering the input this way replaces the in-place bit-reversal swaps,
  /// which get cache-hostile once the buffer outgrows L1.
  std::size_t source(std::size_t i) const { return chirp_.empty() ? kernel_->source(i) : i; }

  /// Forward or inverse DFT of a buffer filled through source().
  void transform_loaded(Complex* data, bool inverse) const {
    if (chirp_.empty())
      kernel_->butterflies(data, inverse);
    else
      transform(data, inverse);
  }

  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::unique_ptr<Radix2<Scalar>> kernel_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_filter_;
  mutable std::vector<Complex> scratch_;
};

/// Per-thread plan cache; plans are not shared across threads.
template <typename Scalar>
const Plan<Scalar>& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Plan<Scalar>>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan<Scalar>>(n)).first;
  return *it->second;
}

}  // namespace fft_detail

/// Complex DFT of a single buffer, in place.
template <typename Scalar>
void fft_inplace(std::vector<std::complex<Scalar>>& data, bool inverse = false) {
  fft_detail::plan_for<Scalar>(data.size()).transform(data.data(), inverse);
}

/// Column-wise real FFT: x is L x C, result is (L/2 + 1) x C.
template <typename Derived>
auto rfft(const Eigen::MatrixBase<Derived>& x) -> ComplexSpectrum<typename Derived::Scalar> {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw std::invalid_argument("rfft: length must be >= 1");
  const auto& plan = fft_detail::plan_for<Scalar>(n);
  const Eigen::Index bins = x.rows() / 2 + 1;
  ComplexSpectrum<Scalar> out(bins, x.cols());
  std::vector<Complex> buf(n);
  Eigen::Index c = 0;
  // Two real columns per complex transform: z = a + i b.
  for (; c + 1 < x.cols(); c += 2) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = Eigen::Index(plan.source(i));
      buf[i] = Complex(x(j, c), x(j, c + 1));
    }
    plan.transform_loaded(buf.data(), false);
    for (Eigen::Index k = 0; k < bins; ++k) {
      const Complex zk = buf[std::size_t(k)];
      const Complex zn = std::conj(buf[(n - std::size_t(k)) % n]);
      out(k, c) = (zk + zn) * Scalar(0.5);
      out(k, c + 1) = (zk - zn) * Complex(0, Scalar(-0.5));
    }
  }
  for (; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(x(Eigen::Index(plan.source(i)), c), Scalar(0));
    plan.transform_loaded(buf.data(), false);
    for (Eigen::Index k = 0; k < bins; ++k) out(k, c) = buf[std::size_t(k)];
  }
  return out;
}

/// Inverse of rfft for a length-L signal (L must match the forward length).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> irfft(const ComplexSpectrum<Scalar>& s, Eigen::Index length) {
  using Complex = std::complex<Scalar>;
  if (length < 1) throw std::invalid_argument("irfft: length must be >= 1");
  if (s.rows() != length / 2 + 1)
    throw std::invalid_argument("irfft: spectrum has " + std::to_string(s.rows()) + " bins, expected " +
                                std::to_string(length / 2 + 1) + " for length " + std::to_string(length));
  const auto n = static_cast<std::size_t>(length);
  const auto& plan = fft_detail::plan_for<Scalar>(n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(length, s.cols());
  std::vector<Complex> buf(n);
  const Scalar inv_n = Scalar(1) / Scalar(length);
  auto hermitian = [&](Eigen::Index col, std::size_t k) -> Complex {
    const std::size_t half = n / 2;
    // DC and Nyquist bins of a real signal are real.
    if (k == 0 || (n % 2 == 0 && k == half)) return Complex(s(Eigen::Index(k), col).real(), Scalar(0));
    return k <= half ? s(Eigen::Index(k), col) : std::conj(s(Eigen::Index(n - k), col));
  };
  Eigen::Index c = 0;
  // Pack two Hermitian spectra into one complex inverse: A + iB.
  for (; c + 1 < s.cols(); c += 2) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = plan.source(k);
      const Complex a = hermitian(c, j), b = hermitian(c + 1, j);
      buf[k] = Complex(a.real() - b.imag(), a.imag() + b.real());
    }
    plan.transform_loaded(buf.data(), true);
    for (std::size_t i = 0; i < n; ++i) {
      out(Eigen::Index(i), c) = buf[i].real() * inv_n;
      out(Eigen::Index(i), c + 1) = buf[i].imag() * inv_n;
    }
  }
  for (; c < s.cols(); ++c) {
    for (std::size_t k = 0; k < n; ++k) buf[k] = hermitian(c, plan.source(k));
    plan.transform_loaded(buf.data(), true);
    for (std::size_t i = 0; i < n; ++i) out(Eigen::Index(i), c) = buf[i].real() * inv_n;
  }
  return out;
}

}  // namespace tgf
