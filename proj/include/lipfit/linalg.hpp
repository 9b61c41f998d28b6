#pragma once

#include "lipfit/autodiff.hpp"
#include "lipfit/tensor.hpp"

#include <functional>
#include <vector>

namespace lipfit {

Tensor matmul(const Tensor& a, const Tensor& b);

struct PowerIteration {
  double sigma = 0.0;
  Vector u;  // left singular vector estimate, |u| = 1
  Vector v;  // right singular vector estimate, |v| = 1
  double residual = 0.0;  // |WᵀW v − σ² v| / σ²
  int iterations = 0;
  bool converged = false;
};

// Power iteration on WᵀW from `start` (normalized internally). Never throws on
// slow convergence; callers inspect `converged`.
PowerIteration power_iteration(const Tensor& w, const Vector& start, double tol, int max_iter);

// Largest singular value. Starts from the normalized all-ones vector (or the
// first deterministic fallback not in the null space of W). Throws
// ConvergenceError carrying the last estimate if `tol` is not met.
double spectral_norm(const Tensor& w, double tol = 1e-9, int max_iter = 500);

// Deterministic start vector used by spectral_norm for an n-column matrix.
Vector default_start_vector(const Tensor& w);

struct CayleyResult {
  Tensor q1;  // k×k
  Tensor q2;  // m×k
};

// Z = U − Uᵀ + VᵀV, Q1 = (I+Z)⁻¹(I−Z), Q2 = −2V(I+Z)⁻¹.
// [Q1; Q2] has orthonormal columns.
CayleyResult cayley(const Tensor& u, const Tensor& v);

namespace ad {
struct CayleyVars {
  Var q1;
  Var q2;
};
CayleyVars cayley(Var u, Var v);
}  // namespace ad

// Scalar objective built on a fresh tape from the bound parameters.
using Objective = std::function<ad::Var(ad::Tape&)>;

// Largest per-coordinate discrepancy between the reverse-mode gradient and a
// central difference with step `step`, over every trainable entry of `params`.
// Discrepancy is |g_ad − g_fd| / max(1, |g_ad|, |g_fd|).
double grad_check(const std::vector<Parameter*>& params, const Objective& f, double step);

// Single-tensor form: f receives the leaf for theta.
double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, const Tensor& theta, double step);

}  // namespace lipfit
