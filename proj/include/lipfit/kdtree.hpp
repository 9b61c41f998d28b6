#pragma once

#include "lipfit/tensor.hpp"

#include <vector>

namespace lipfit {

// Static k-d tree over the rows of a point matrix, exact nearest-neighbour
// distance queries only.
class KdTree {
 public:
  explicit KdTree(const Tensor& points, Index leaf_size = 8);

  double nearest_squared(const double* query) const;
  double nearest(const double* query) const;

 private:
  struct Node {
    Index lo, hi;  // range into order_
    Index dim = -1;
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(Index lo, Index hi);
  void search(int node, const double* q, double& best) const;

  Tensor points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index leaf_size_;
};

}  // namespace lipfit
