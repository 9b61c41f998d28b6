#include "doctest.h"

#include "lipfit/autodiff.hpp"
#include "lipfit/error.hpp"
#include "lipfit/linalg.hpp"
#include "lipfit/rng.hpp"

#include <cmath>

using namespace lipfit;
using ad::Var;

namespace {

Tensor random_tensor(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(r, c);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

// Weighted sum so every output entry gets a distinct adjoint.
Var probe(ad::Tape& tape, Var v) {
  const Tensor w = random_tensor(v.rows(), v.cols(), 99);
  return ad::sum(ad::hadamard(v, tape.constant(w)));
}

double check_unary(const std::function<Var(ad::Tape&, Var)>& op, const Tensor& x) {
  return grad_check([&](ad::Tape& tape, Var t) { return probe(tape, op(tape, t)); }, x, 1e-6);
}

}  // namespace

TEST_CASE("every op passes a finite difference check") {
  const Tensor x = random_tensor(3, 4, 1);
  const Tensor other = random_tensor(3, 4, 2);
  const Tensor rhs = random_tensor(4, 2, 3);
  const Tensor row = random_tensor(1, 4, 4);
  const Tensor sq = random_tensor(3, 3, 5) + 4.0 * Tensor::Identity(3, 3);

  SUBCASE("matmul") {
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::matmul(a, t.constant(rhs)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var b) { return ad::matmul(t.constant(other.transpose()), b); }, x) <= 1e-7);
  }
  SUBCASE("matmul_nt") {
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::matmul_nt(a, t.constant(other)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var b) { return ad::matmul_nt(t.constant(other), b); }, x) <= 1e-7);
  }
  SUBCASE("elementwise") {
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::transpose(a); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::add(a, t.constant(other)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::sub(t.constant(other), a); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::scale(a, -1.7); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::add_scalar(a, 0.3); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::hadamard(a, t.constant(other)); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::exp(a); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::square(a); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::activate(a, Activation::Tanh); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::activate(a, Activation::Identity); }, x) <= 1e-7);
    // Away from the kink.
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::activate(a, Activation::Relu); }, x) <= 1e-7);
  }
  SUBCASE("broadcasts") {
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::add_row(a, t.constant(row)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var r) { return ad::add_row(t.constant(x), r); }, row) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::scale_cols(a, t.constant(row)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var r) { return ad::scale_cols(t.constant(x), r); }, row) <= 1e-7);
    const Tensor s = Tensor::Constant(1, 1, 0.7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::scale_by(a, t.constant(s)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var c) { return ad::scale_by(t.constant(x), c); }, s) <= 1e-7);
  }
  SUBCASE("reductions and stacking") {
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::sum(a); }, x) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::sum_squares(a); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::vstack(a, t.constant(other)); }, x) <= 1e-7);
    CHECK(check_unary([&](ad::Tape& t, Var a) { return ad::vstack(t.constant(other), a); }, x) <= 1e-7);
  }
  SUBCASE("square matrix ops") {
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::inverse(a); }, sq) <= 1e-6);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::identity_minus(a); }, sq) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::identity_plus(a); }, sq) <= 1e-7);
  }
  SUBCASE("max_scalar on both branches") {
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::max_scalar(a, 0.0); }, Tensor::Constant(1, 1, 1.5)) <= 1e-7);
    CHECK(check_unary([](ad::Tape&, Var a) { return ad::max_scalar(a, 3.0); }, Tensor::Constant(1, 1, 1.5)) == 0.0);
  }
}

TEST_CASE("max_scalar sends the adjoint to its argument on a tie") {
  ad::Tape tape;
  Parameter p("a", Tensor::Constant(1, 1, 2.0));
  Var m = ad::max_scalar(tape.param(p), 2.0);
  tape.backward(m);
  CHECK(p.grad(0, 0) == 1.0);
}

TEST_CASE("shared subexpressions accumulate adjoints") {
  ad::Tape tape;
  Parameter p("x", Tensor::Constant(1, 1, 3.0));
  Var x = tape.param(p);
  // f = x*x + x  ->  f' = 2x + 1 = 7
  Var f = ad::add(ad::hadamard(x, x), x);
  tape.backward(f);
  CHECK(p.grad(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("nodes are recorded in topological order") {
  ad::Tape tape;
  Var a = tape.constant(Tensor::Ones(2, 2));
  Var b = ad::scale(a, 2.0);
  Var c = ad::add(a, b);
  CHECK(a.id < b.id);
  CHECK(b.id < c.id);
  CHECK(tape.size() == 3);
}

TEST_CASE("frozen parameters receive no gradient") {
  ad::Tape tape;
  Parameter p("w", Tensor::Constant(1, 1, 1.0));
  p.trainable = false;
  tape.backward(ad::square(tape.param(p)));
  CHECK(p.grad(0, 0) == 0.0);
}

TEST_CASE("backward needs a scalar root on the same tape") {
  ad::Tape tape, other;
  Var m = tape.constant(Tensor::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(m), Error);
  CHECK_THROWS_AS(tape.backward(other.constant(Tensor::Ones(1, 1))), Error);
}

TEST_CASE("shape errors are dimension errors") {
  ad::Tape tape;
  Var a = tape.constant(Tensor::Ones(2, 3));
  Var b = tape.constant(Tensor::Ones(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
  CHECK_THROWS_AS(ad::inverse(a), Error);
  CHECK_THROWS_AS(ad::add_row(a, tape.constant(Tensor::Ones(1, 2))), Error);
}

TEST_CASE("inverse of a singular matrix is a numeric error") {
  ad::Tape tape;
  try {
    ad::inverse(tape.constant(Tensor::Zero(2, 2)));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("activation names round-trip") {
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::Tanh})
    CHECK(activation_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(activation_from_string("gelu"), Error);
}
