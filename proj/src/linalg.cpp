#include "lipfit/linalg.hpp"

#include "lipfit/error.hpp"

#include <algorithm>
#include <cmath>

namespace lipfit {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::Dimension, "matmul: inner dimensions " + shape_string(a) + " · " + shape_string(b));
  }
  return a * b;
}

PowerIteration power_iteration(const Tensor& w, const Vector& start, double tol, int max_iter) {
  PowerIteration out;
  out.v = start / start.norm();
  Vector wv = w * out.v;
  for (int it = 1; it <= max_iter; ++it) {
    Vector z = w.transpose() * wv;  // WᵀW v
    const double lambda = out.v.dot(z);
    out.iterations = it;
    if (lambda <= 0.0) {
      out.sigma = 0.0;
      out.residual = 0.0;
      out.converged = true;
      out.u = Vector::Zero(w.rows());
      return out;
    }
    out.residual = (z - lambda * out.v).norm() / lambda;
    out.sigma = std::sqrt(lambda);
    if (out.residual <= tol) {
      out.converged = true;
      break;
    }
    out.v = z / z.norm();
    wv = w * out.v;
  }
  // One final Rayleigh quotient on the last vector keeps sigma and v consistent.
  wv = w * out.v;
  out.sigma = wv.norm();
  out.u = out.sigma > 0.0 ? Vector(wv / out.sigma) : Vector::Zero(w.rows());
  return out;
}

Vector default_start_vector(const Tensor& w) {
  const Index n = w.cols();
  Vector v = Vector::Ones(n);
  if ((w * v).squaredNorm() > 0.0) return v / v.norm();
  for (Index i = 0; i < n; ++i) v(i) = (i % 2 == 0) ? 1.0 : -1.0;
  if ((w * v).squaredNorm() > 0.0) return v / v.norm();
  for (Index i = 0; i < n; ++i) {
    if (w.col(i).squaredNorm() > 0.0) return Vector::Unit(n, i);
  }
  return Vector::Ones(n) / std::sqrt(static_cast<double>(n));
}

double spectral_norm(const Tensor& w, double tol, int max_iter) {
  require(w.size() > 0, ErrorKind::Argument, "spectral_norm: empty matrix");
  require(tol > 0.0, ErrorKind::Argument, "spectral_norm: tol must be positive");
  require(max_iter >= 1, ErrorKind::Argument, "spectral_norm: max_iter must be >= 1");
  require(w.allFinite(), ErrorKind::Numeric, "spectral_norm: non-finite entries");
  require(w.cwiseAbs().maxCoeff() > 0.0, ErrorKind::Argument, "spectral_norm: zero matrix");
  const PowerIteration pi = power_iteration(w, default_start_vector(w), tol, max_iter);
  if (!pi.converged) {
    throw ConvergenceError("spectral_norm: residual " + std::to_string(pi.residual) + " after " +
                               std::to_string(pi.iterations) + " iterations",
                           pi.sigma);
  }
  return pi.sigma;
}

CayleyResult cayley(const Tensor& u, const Tensor& v) {
  const Index k = u.rows();
  if (u.cols() != k) fail(ErrorKind::Dimension, "cayley: u must be square, got " + shape_string(u));
  if (v.cols() != k) fail(ErrorKind::Dimension, "cayley: v must have " + std::to_string(k) + " columns");
  if (!u.allFinite() || !v.allFinite()) fail(ErrorKind::Numeric, "cayley: non-finite input");
  const Tensor z = u - u.transpose() + v.transpose() * v;
  const Tensor eye = Tensor::Identity(k, k);
  Eigen::PartialPivLU<Tensor> lu(eye + z);
  CayleyResult r;
  r.q1 = lu.solve(Tensor(eye - z));
  // V (I+Z)⁻¹ = ((I+Z)⁻ᵀ Vᵀ)ᵀ
  Eigen::PartialPivLU<Tensor> lut(Tensor((eye + z).transpose()));
  r.q2 = -2.0 * Tensor(lut.solve(Tensor(v.transpose()))).transpose();
  if (!r.q1.allFinite() || !r.q2.allFinite()) fail(ErrorKind::Numeric, "cayley: linear solve failed");
  return r;
}

namespace ad {

CayleyVars cayley(Var u, Var v) {
  const Index k = u.rows();
  if (u.cols() != k) fail(ErrorKind::Dimension, "cayley: u must be square, got " + shape_string(u.value()));
  if (v.cols() != k) fail(ErrorKind::Dimension, "cayley: v must have " + std::to_string(k) + " columns");
  Var z = add(sub(u, transpose(u)), matmul(transpose(v), v));
  Var inv = inverse(identity_plus(z));
  CayleyVars r;
  r.q1 = matmul(inv, identity_minus(z));
  r.q2 = scale(matmul(v, inv), -2.0);
  return r;
}

}  // namespace ad

double grad_check(const std::vector<Parameter*>& params, const Objective& f, double step) {
  require(step > 0.0, ErrorKind::Argument, "grad_check: step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::Var out = f(tape);
    require(std::isfinite(out.scalar()), ErrorKind::Numeric, "grad_check: non-finite objective");
    tape.backward(out);
  }
  auto eval = [&]() {
    ad::Tape tape;
    const double v = f(tape).scalar();
    require(std::isfinite(v), ErrorKind::Numeric, "grad_check: non-finite objective at perturbed point");
    return v;
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    for (Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      const double fp = eval();
      x = saved - step;
      const double fm = eval();
      x = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double g = p->grad.data()[i];
      const double denom = std::max({1.0, std::abs(g), std::abs(fd)});
      worst = std::max(worst, std::abs(g - fd) / denom);
    }
  }
  return worst;
}

double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const Tensor& theta, double step) {
  Parameter p("theta", theta);
  return grad_check({&p}, [&](ad::Tape& tape) { return f(tape, tape.param(p)); }, step);
}

}  // namespace lipfit
