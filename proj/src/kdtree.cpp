#include "lipfit/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lipfit {

KdTree::KdTree(const Tensor& points, Index leaf_size) : points_(points), leaf_size_(std::max<Index>(1, leaf_size)) {
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), Index{0});
  if (points_.rows() > 0) build(0, points_.rows());
}

int KdTree::build(Index lo, Index hi) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{lo, hi});
  if (hi - lo <= leaf_size_) return id;

  Index best_dim = 0;
  double best_spread = -1.0;
  for (Index d = 0; d < points_.cols(); ++d) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (Index i = lo; i < hi; ++i) {
      const double v = points_(order_[i], d);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mx - mn > best_spread) {
      best_spread = mx - mn;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) return id;  // all coincident

  const Index mid = lo + (hi - lo) / 2;
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                   [&](Index a, Index b) { return points_(a, best_dim) < points_(b, best_dim); });
  const double split = points_(order_[mid], best_dim);
  const int left = build(lo, mid);
  const int right = build(mid, hi);
  nodes_[id].dim = best_dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const double* q, double& best) const {
  const Node& n = nodes_[node];
  if (n.dim < 0) {
    const Index dims = points_.cols();
    for (Index i = n.lo; i < n.hi; ++i) {
      const double* p = points_.data() + order_[i] * dims;
      double d2 = 0.0;
      for (Index k = 0; k < dims && d2 < best; ++k) {
        const double t = p[k] - q[k];
        d2 += t * t;
      }
      best = std::min(best, d2);
    }
    return;
  }
  const double diff = q[n.dim] - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff < best) search(far, q, best);
}

double KdTree::nearest_squared(const double* query) const {
  double best = std::numeric_limits<double>::infinity();
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

double KdTree::nearest(const double* query) const { return std::sqrt(nearest_squared(query)); }

}  // namespace lipfit
