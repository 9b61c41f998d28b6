#pragma once

#include "lipfit/data.hpp"

#include <vector>

namespace lipfit {

/// Minimal-Lipschitz interpolant of a finite dataset, built per output
/// coordinate from the McShane (upper) and Whitney (lower) envelopes
///
///   u_j(x) = min_i ( y_ij + L_j |x − x_i| )
///   l_j(x) = max_i ( y_ij − L_j |x − x_i| )
///
/// and their midpoint. With L_j at least the coordinate's own data quotient,
/// both envelopes pass through every sample, so the midpoint interpolates and
/// each coordinate is L_j-Lipschitz; the vector map is |L|_2-Lipschitz.
class LipschitzExtension {
 public:
  // L_j defaults to the per-coordinate data quotient.
  explicit LipschitzExtension(LabeledDataset ds);
  LipschitzExtension(LabeledDataset ds, std::vector<double> lip);

  const LabeledDataset& dataset() const { return ds_; }
  const std::vector<double>& lip() const { return lip_; }
  // Euclidean norm of the per-coordinate constants.
  double vector_lipschitz() const;

  double upper(const Vector& x, Index j) const;
  double lower(const Vector& x, Index j) const;
  Vector evaluate(const Vector& x) const;
  Tensor evaluate_batch(const Tensor& points) const;

  BatchFn as_batch_fn() const;

 private:
  LabeledDataset ds_;
  std::vector<double> lip_;
};

}  // namespace lipfit
