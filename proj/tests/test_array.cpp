#include <tgf/array.hpp>
#include <tgf/fft.hpp>
#include <tgf/grad_check.hpp>

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tgf;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("roll advances the sequence") {
  const Matrix a = col({1, 2, 3, 4});
  CHECK(roll(a, 0) == a);
  CHECK(roll(a, 1) == col({2, 3, 4, 1}));
  CHECK(roll(a, 4) == a);
  CHECK(roll(roll(a, 3), 1) == a);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tape tape;
  Matrix z = Matrix::Zero(1, 2);
  Var s = softmax(tape.constant(z), 1);
  CHECK(s.value()(0, 0) == doctest::Approx(0.5));
  CHECK(s.value()(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("backward through sum and relu") {
  {
    Tape tape;
    Var x = tape.variable(Matrix::Ones(1, 3) * 0.7);
    tape.backward(sum(x));
    CHECK(x.grad() == Matrix::Ones(1, 3));
  }
  {
    Tape tape;
    Matrix v(1, 2);
    v << -1.0, 2.0;
    Var x = tape.variable(v);
    tape.backward(sum(relu(x)));
    CHECK(x.grad()(0, 0) == 0.0);
    CHECK(x.grad()(0, 1) == 1.0);
  }
}

TEST_CASE("a consumed tape refuses a second backward") {
  Tape tape;
  Var x = tape.variable(Matrix::Ones(2, 2));
  Var l = sum(x);
  tape.backward(l);
  CHECK_THROWS(tape.backward(l));
}

TEST_CASE("shape mismatches throw ShapeError") {
  Tape tape;
  Var a = tape.constant(Matrix::Ones(2, 3));
  Var b = tape.constant(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, tape.constant(Matrix::Ones(3, 2))), ShapeError);
}

TEST_CASE("composite graph matches finite differences") {
  std::mt19937_64 rng(7);
  const Matrix w = random_matrix(4, 3, rng);
  const Matrix x0 = random_matrix(5, 4, rng);
  auto f = [&](Tape& t, const Var& x) {
    Var h = matmul(layer_norm(x), t.constant(w));
    Var s = softmax(h, 1);
    Var r = roll(mul(s, h), 2);
    return sum(log(clamp(add(r, t.constant(Matrix::Constant(5, 3, 3.0))), 1e-3, 1e3)));
  };
  GradCheckReport rep = grad_check(f, x0, {1e-4, 1e-5});
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("grad_check on a quadratic form is exact") {
  std::mt19937_64 rng(1);
  Matrix a = random_matrix(4, 4, rng);
  a = a * a.transpose();
  const Matrix x0 = random_matrix(1, 4, rng);
  auto f = [&](Tape& t, const Var& x) { return matmul(matmul(x, t.constant(a)), transpose(x)); };
  GradCheckReport rep = grad_check(f, x0);
  CHECK(rep.max_rel_error < 1e-7);
}

TEST_CASE("grad_check on layer_norm") {
  std::mt19937_64 rng(2);
  const Matrix x0 = random_matrix(3, 6, rng);
  const Matrix w = random_matrix(3, 6, rng);
  auto f = [&](Tape& t, const Var& x) { return sum(mul(layer_norm(x), t.constant(w))); };
  GradCheckReport rep = grad_check(f, x0);
  CHECK(rep.max_rel_error < 1e-5);
  CHECK(rep.unreliable.empty());
}

TEST_CASE("grad_check excludes a relu kink") {
  Matrix x0(1, 3);
  x0 << 0.0, 1.5, -2.0;
  auto f = [](Tape&, const Var& x) { return sum(relu(x)); };
  GradCheckReport rep = grad_check(f, x0);
  REQUIRE(rep.unreliable.size() == 1);
  CHECK(rep.unreliable[0] == 0);
  CHECK(rep.passed);
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
  std::mt19937_64 rng(3);
  Tape tape;
  Var y = layer_norm(tape.constant(random_matrix(4, 10, rng) * 5.0), 1e-12);
  for (Index r = 0; r < 4; ++r) {
    const auto row = y.value().row(r);
    CHECK(row.mean() == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK((row.array() - row.mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("rfft of a constant series is DC only") {
  for (Index L : {4, 7, 16}) {
    Matrix x = Matrix::Constant(L, 1, 2.5);
    auto s = rfft(x);
    CHECK(std::abs(s(0, 0) - std::complex<double>(2.5 * static_cast<double>(L), 0.0)) < 1e-12);
    for (Index k = 1; k < s.rows(); ++k) CHECK(std::abs(s(k, 0)) < 1e-12);
  }
}

TEST_CASE("irfft inverts rfft") {
  std::mt19937_64 rng(4);
  for (Index L : {1, 2, 3, 5, 16, 31, 64, 100}) {
    const Matrix x = random_matrix(L, 5, rng);
    const Matrix back = irfft(rfft(x), L);
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("rfft of a one-cycle cosine lands in bin 1") {
  const Index L = 16;
  Matrix x(L, 1);
  for (Index n = 0; n < L; ++n) x(n, 0) = std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / L);
  auto s = rfft(x);
  CHECK(std::abs(s(1, 0)) == doctest::Approx(L / 2.0));
  for (Index k = 0; k < s.rows(); ++k)
    if (k != 1) CHECK(std::abs(s(k, 0)) < 1e-9);
}

TEST_CASE("rfft matches the DFT definition and is linear") {
  std::mt19937_64 rng(5);
  for (Index L : {6, 8, 13}) {
    const Matrix a = random_matrix(L, 3, rng), b = random_matrix(L, 3, rng);
    auto sa = rfft(a), sb = rfft(b), sab = rfft(Matrix(2.0 * a - b));
    CHECK((sab - (2.0 * sa - sb)).cwiseAbs().maxCoeff() < 1e-10);
    for (Index c = 0; c < 3; ++c)
      for (Index k = 0; k <= L / 2; ++k) {
        std::complex<double> ref = 0.0;
        for (Index n = 0; n < L; ++n)
          ref += a(n, c) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / double(L));
        CHECK(std::abs(sa(k, c) - ref) < 1e-10);
      }
  }
}

TEST_CASE("Parseval holds for the unnormalised transform") {
  std::mt19937_64 rng(6);
  for (Index L : {8, 9}) {
    const Matrix x = random_matrix(L, 1, rng);
    auto s = rfft(x);
    double energy = 0.0;
    for (Index k = 0; k < L; ++k) {
      const Index kk = k <= L / 2 ? k : L - k;
      energy += std::norm(s(kk, 0));
    }
    CHECK(energy / static_cast<double>(L) == doctest::Approx(x.squaredNorm()).epsilon(1e-12));
  }
}
