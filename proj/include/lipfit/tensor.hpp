#pragma once

#include <Eigen/Dense>

#include <string>

namespace lipfit {

// Dense 2-D real array, row-major. Vectors are 1×n rows unless stated.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Tensor& t) { return t.allFinite(); }

inline std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

}  // namespace lipfit
