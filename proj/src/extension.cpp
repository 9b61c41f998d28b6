#include "lipfit/extension.hpp"

#include "lipfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lipfit {

LipschitzExtension::LipschitzExtension(LabeledDataset ds) : ds_(std::move(ds)) {
  ds_.validate();
  if (ds_.size() >= 2) {
    lip_ = empirical_lipschitz_lower_per_output(ds_);
  } else {
    lip_.assign(static_cast<std::size_t>(ds_.output_dim()), 0.0);
  }
}

LipschitzExtension::LipschitzExtension(LabeledDataset ds, std::vector<double> lip)
    : ds_(std::move(ds)), lip_(std::move(lip)) {
  ds_.validate();
  require(static_cast<Index>(lip_.size()) == ds_.output_dim(), ErrorKind::Dimension,
          "extension: need one Lipschitz constant per output coordinate");
  for (double l : lip_) require(l >= 0.0 && std::isfinite(l), ErrorKind::Argument, "extension: constants must be >= 0");
}

double LipschitzExtension::vector_lipschitz() const {
  double s = 0.0;
  for (double l : lip_) s += l * l;
  return std::sqrt(s);
}

double LipschitzExtension::upper(const Vector& x, Index j) const {
  require(x.size() == ds_.input_dim(), ErrorKind::Dimension, "extension: query dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ds_.size(); ++i) {
    const double d = (ds_.inputs.row(i).transpose() - x).norm();
    best = std::min(best, ds_.outputs(i, j) + lip_[j] * d);
  }
  return best;
}

double LipschitzExtension::lower(const Vector& x, Index j) const {
  require(x.size() == ds_.input_dim(), ErrorKind::Dimension, "extension: query dimension mismatch");
  double best = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ds_.size(); ++i) {
    const double d = (ds_.inputs.row(i).transpose() - x).norm();
    best = std::max(best, ds_.outputs(i, j) - lip_[j] * d);
  }
  return best;
}

Vector LipschitzExtension::evaluate(const Vector& x) const {
  require(x.size() == ds_.input_dim(), ErrorKind::Dimension, "extension: query dimension mismatch");
  const Index m = ds_.output_dim();
  Vector up = Vector::Constant(m, std::numeric_limits<double>::infinity());
  Vector lo = Vector::Constant(m, -std::numeric_limits<double>::infinity());
  for (Index i = 0; i < ds_.size(); ++i) {
    const double d = (ds_.inputs.row(i).transpose() - x).norm();
    for (Index j = 0; j < m; ++j) {
      up(j) = std::min(up(j), ds_.outputs(i, j) + lip_[j] * d);
      lo(j) = std::max(lo(j), ds_.outputs(i, j) - lip_[j] * d);
    }
  }
  return 0.5 * (up + lo);
}

Tensor LipschitzExtension::evaluate_batch(const Tensor& points) const {
  Tensor out(points.rows(), ds_.output_dim());
  for (Index r = 0; r < points.rows(); ++r) out.row(r) = evaluate(points.row(r).transpose()).transpose();
  return out;
}

BatchFn LipschitzExtension::as_batch_fn() const {
  return [this](const Tensor& points) { return evaluate_batch(points); };
}

}  // namespace lipfit
